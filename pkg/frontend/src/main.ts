// Browser wiring: connect, reduce frames into state, re-render, and turn
// operator gestures into protocol messages.

import { ConsoleClient } from "./client";
import { buildSetTarget, buildSetWeights } from "./protocol";
import {
    ConsoleState,
    expirePending,
    initialState,
    markSent,
    onConnectionChange,
    onFrame,
} from "./state";
import { renderAll, renderControlsDisabled } from "./render";

let state: ConsoleState = initialState();

const root = document.getElementById("console-root")!;
const weightSlider = document.getElementById("weight-slider") as HTMLInputElement;
const weightLabel = document.getElementById("weight-label")!;
const targetForm = document.getElementById("target-form") as HTMLFormElement;
const pauseBtn = document.getElementById("pause") as HTMLButtonElement;
const resumeBtn = document.getElementById("resume") as HTMLButtonElement;
const stepBtn = document.getElementById("step") as HTMLButtonElement;
const resetBtn = document.getElementById("reset") as HTMLButtonElement;
const speedInput = document.getElementById("speed") as HTMLInputElement;

const url = new URLSearchParams(location.search).get("server") ?? "ws://127.0.0.1:8765";

function redraw() {
    root.innerHTML = renderAll(state);
    const locked = renderControlsDisabled(state);
    for (const el of [weightSlider, pauseBtn, resumeBtn, stepBtn, resetBtn, speedInput]) {
        el.disabled = locked;
    }
    for (const el of Array.from(targetForm.elements)) {
        (el as HTMLInputElement).disabled = locked;
    }
}

function update(next: ConsoleState) {
    state = next;
    redraw();
}

const client = new ConsoleClient(url, {
    onFrame: (frame) => update(onFrame(state, frame)),
    onConnection: (conn) => update(onConnectionChange(state, conn)),
});

weightSlider.addEventListener("change", () => {
    const wGreen = Number(weightSlider.value) / 100;
    weightLabel.textContent = wGreen.toFixed(2);
    try {
        const msg = buildSetWeights(state.nextCmdId, [1 - wGreen, wGreen]);
        if (client.send(msg)) {
            update(markSent(state, state.nextCmdId, Date.now()));
        }
    } catch (e) {
        update({ ...state, lastError: String(e) });
    }
});

targetForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(targetForm);
    try {
        const msg = buildSetTarget(
            state.nextCmdId,
            [Number(data.get("obj0")), Number(data.get("obj1"))],
            Number(data.get("horizon")),
        );
        if (client.send(msg)) {
            update(markSent(state, state.nextCmdId, Date.now()));
        }
    } catch (e) {
        update({ ...state, lastError: String(e) });
    }
});

pauseBtn.addEventListener("click", () => client.send({ type: "pause" }));
resumeBtn.addEventListener("click", () => client.send({ type: "resume" }));
stepBtn.addEventListener("click", () => client.send({ type: "step" }));
resetBtn.addEventListener("click", () =>
    client.send({ type: "reset", seed: Math.floor(Math.random() * 1_000_000) }),
);
speedInput.addEventListener("change", () =>
    client.send({ type: "set_speed", steps_per_sec: Number(speedInput.value) }),
);

setInterval(() => update(expirePending(state, Date.now())), 250);

client.connect();
redraw();
