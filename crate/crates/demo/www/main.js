import init, { multiplierProfile, stressSlice, radiusSweep, demoGridSize } from "./pkg/nsel_demo.js";

const $ = (id) => document.getElementById(id);

function line(canvas, series, colors) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const xs = series[0].map((p) => p[0]);
  const ys = series.flat().map((p) => p[1]);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys, 1e-300)];
  const px = (x) => 30 + ((x - x0) / (x1 - x0 || 1)) * (w - 40);
  const py = (y) => h - 20 - ((y - y0) / (y1 - y0 || 1)) * (h - 30);
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(px(x0), py(0));
  ctx.lineTo(px(x1), py(0));
  ctx.stroke();
  series.forEach((pts, i) => {
    ctx.strokeStyle = colors[i];
    ctx.beginPath();
    pts.forEach(([x, y], k) => (k ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y))));
    ctx.stroke();
  });
}

function pairs(flat, stride, pick) {
  const out = [];
  for (let i = 0; i < flat.length; i += stride) out.push(pick(flat.subarray(i, i + stride)));
  return out;
}

function guard(errId, f) {
  try {
    $(errId).textContent = "";
    f();
  } catch (e) {
    $(errId).textContent = String(e);
  }
}

function drawMultiplier() {
  const delta = Number($("m-delta").value);
  $("m-delta-out").textContent = delta.toFixed(2);
  guard("m-err", () => {
    const p = multiplierProfile(delta, 64);
    line($("m-plot"), [pairs(p, 2, (c) => [c[0], c[1]])], ["#1f5fbf"]);
  });
}

function drawStress() {
  const delta = Number($("s-delta").value);
  const amp = Number($("s-amp").value);
  $("s-delta-out").textContent = delta.toFixed(2);
  $("s-amp-out").textContent = amp.toFixed(2);
  guard("s-err", () => {
    const n = demoGridSize();
    const v = stressSlice(delta, amp);
    const max = Math.max(...v, 1e-300);
    $("s-max").textContent = max.toExponential(3);
    const canvas = $("s-plot");
    const ctx = canvas.getContext("2d");
    const cell = canvas.width / n;
    for (let y = 0; y < n; y++) {
      for (let x = 0; x < n; x++) {
        const t = v[y * n + x] / max;
        ctx.fillStyle = `rgb(${Math.round(255 * t)}, ${Math.round(80 * t)}, ${Math.round(255 * (1 - t))})`;
        ctx.fillRect(x * cell, (n - 1 - y) * cell, cell, cell);
      }
    }
  });
}

function drawSweep() {
  const amp = Number($("r-amp").value);
  $("r-amp-out").textContent = amp.toFixed(1);
  guard("r-err", () => {
    const s = radiusSweep(1e-2, 1e5, 60, amp);
    const ens = pairs(s, 3, (c) => [Math.log10(c[0]), Math.log10(c[2] || 1e-300)]);
    const lam = pairs(s, 3, (c) => [Math.log10(c[0]), c[1]]);
    line($("r-plot"), [ens, lam], ["#1f5fbf", "#c0392b"]);
  });
}

await init();
for (const [id, f] of [["m-delta", drawMultiplier], ["s-delta", drawStress], ["s-amp", drawStress], ["r-amp", drawSweep]]) {
  $(id).addEventListener("input", f);
}
drawMultiplier();
drawStress();
drawSweep();
