import init, { Demo } from "./pkg/ldls_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const SCALE = 5;

function color(id) {
  // golden-angle hues keep neighbouring ids apart
  const h = (id * 137.508) % 360;
  return `hsl(${h} 70% 55%)`;
}

function rgb(id) {
  const c = document.createElement("canvas").getContext("2d");
  c.fillStyle = color(id);
  c.fillRect(0, 0, 1, 1);
  return c.getImageData(0, 0, 1, 1).data;
}

const palette = new Map();
const paint = (id) => {
  if (!palette.has(id)) palette.set(id, rgb(id));
  return palette.get(id);
};

function draw(canvas, demo, fill) {
  const { width, height } = demo;
  canvas.width = width;
  canvas.height = height;
  canvas.style.width = `${width * SCALE}px`;
  canvas.style.height = `${height * SCALE}px`;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(width, height);
  for (let p = 0; p < width * height; p++) {
    const [r, g, b] = fill(p);
    img.data.set([r, g, b, 255], p * 4);
  }
  ctx.putImageData(img, 0, 0);
}

function shade(depth, p) {
  const v = Math.max(40, 230 - depth[p] * 6);
  return [v, v, v];
}

function labelled(ids, depth, wrong) {
  return (p) => {
    if (wrong && wrong[p]) return [220, 30, 30];
    return ids[p] === 0 ? shade(depth, p) : paint(ids[p]);
  };
}

function plot(canvas, deltas) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const logs = Array.from(deltas, (d) => Math.log10(Math.max(d, 1e-16)));
  if (logs.length === 0) return;
  const lo = Math.min(...logs), hi = Math.max(...logs);
  const y = (v) => h - 10 - ((v - lo) / Math.max(hi - lo, 1e-9)) * (h - 20);
  ctx.strokeStyle = "#36c";
  ctx.beginPath();
  logs.forEach((v, i) => {
    const x = 30 + (i / Math.max(logs.length - 1, 1)) * (w - 40);
    i ? ctx.lineTo(x, y(v)) : ctx.moveTo(x, y(v));
  });
  ctx.stroke();
  ctx.fillStyle = "#555";
  ctx.fillText(`1e${hi.toFixed(0)}`, 2, 12);
  ctx.fillText(`1e${lo.toFixed(0)}`, 2, h - 4);
}

let demo = null;
let sceneKey = "";

function update() {
  const key = [$("kind").value, num("bleed"), num("shift_u"), num("shift_v")].join();
  try {
    if (key !== sceneKey) {
      demo?.free();
      demo = new Demo($("kind").value, num("bleed"), num("shift_u"), num("shift_v"));
      sceneKey = key;
    }
    const depth = demo.depth();
    const truth = demo.truth();
    const args = [num("k"), num("sigma"), num("lambda"), num("box"), num("iters")];
    const t0 = performance.now();
    const run = demo.segment($("mode").value, ...args);
    const ms = performance.now() - t0;
    const labels = run.labels();
    const wrong = labels.map((l, p) => (l === truth[p] ? 0 : 1));

    draw($("masks"), demo, labelled(demo.masks(), depth));
    draw($("result"), demo, labelled(labels, depth, wrong));
    draw($("truth"), demo, labelled(truth, depth));
    plot($("curve"), demo.convergence(...args));

    const errors = wrong.reduce((a, b) => a + b, 0);
    $("status").textContent =
      `mean class IoU  ${run.meanIou.toFixed(4)}\n` +
      `instances found ${run.matchedInstances} / ${demo.instances} (IoU >= 0.5)\n` +
      `wrong points    ${errors}\n` +
      `iterations      ${run.iterations}${run.converged ? " (converged)" : ""}\n` +
      `time            ${ms.toFixed(1)} ms`;
    run.free();
  } catch (e) {
    $("status").textContent = `error: ${e.message ?? e}`;
  }
}

await init();
for (const el of document.querySelectorAll("input, select")) {
  el.addEventListener("change", update);
}
update();
