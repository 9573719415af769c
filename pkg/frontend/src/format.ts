// Numeric rendering pinned to the server's six-fractional-digit convention.
// Values shown to the operator must be string-equal to what the server
// streamed, so the formatter must agree with the server for every value the
// server can produce (including negative zero, which toFixed would drop).

export function fmt6(v: number): string {
    if (!Number.isFinite(v)) {
        throw new Error(`cannot render non-finite value ${v}`);
    }
    const rendered = v.toFixed(6);
    if (Object.is(v, -0)) {
        return "-0.000000";
    }
    return rendered;
}

export function fmtVec(vs: number[]): string {
    return vs.map(fmt6).join(", ");
}
