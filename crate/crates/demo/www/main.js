import init, { gait_schedule, gait_timing, swing_path, filter_step } from "./pkg/gaitspace_demo.js";

const $ = (id) => document.getElementById(id);
const LEGS = ["LF", "RF", "LH", "RH"];

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

function drawSchedule() {
  const name = $("gait").value;
  const strides = 3, samples = 200, n = strides * samples;
  const s = gait_schedule(name, strides, samples);
  const [duty, period] = gait_timing(name);
  $("gait-info").textContent = `duty ${duty.toFixed(2)}, stride ${period.toFixed(2)} s`;
  const c = $("schedule"), ctx = clear(c);
  const left = 40, rowH = c.height / 4, w = (c.width - left) / n;
  ctx.font = "12px sans-serif";
  for (let leg = 0; leg < 4; leg++) {
    ctx.fillStyle = "#222";
    ctx.fillText(LEGS[leg], 4, leg * rowH + rowH / 2 + 4);
    ctx.fillStyle = "#3b6ea5";
    for (let t = 0; t < n; t++) {
      if (s[leg * n + t]) ctx.fillRect(left + t * w, leg * rowH + 6, w + 0.5, rowH - 12);
    }
  }
  ctx.strokeStyle = "#999";
  for (let k = 1; k < strides; k++) {
    const x = left + k * samples * w;
    ctx.beginPath(); ctx.moveTo(x, 0); ctx.lineTo(x, c.height); ctx.stroke();
  }
}

function drawSwing() {
  const h = +$("height").value, l = +$("length").value;
  const p = swing_path(h, l, 101);
  const c = $("swing"), ctx = clear(c);
  const scale = Math.min((c.width - 40) / 0.3, (c.height - 20) / 0.12);
  ctx.strokeStyle = "#999";
  ctx.beginPath(); ctx.moveTo(0, c.height - 10); ctx.lineTo(c.width, c.height - 10); ctx.stroke();
  ctx.strokeStyle = "#c0392b"; ctx.lineWidth = 2;
  ctx.beginPath();
  for (let i = 0; i < p.length; i += 2) {
    const x = 20 + p[i] * scale, y = c.height - 10 - p[i + 1] * scale;
    i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
  }
  ctx.stroke();
}

function drawFilter() {
  const rate = 400, seconds = 1.5;
  let y;
  try {
    y = filter_step(+$("rise").value, +$("zeta").value, rate, seconds);
    $("error").textContent = "";
  } catch (e) {
    $("error").textContent = String(e);
    return;
  }
  const peak = Math.max(...y);
  $("filter-info").textContent = `overshoot ${((peak - 1) * 100).toFixed(1)}%`;
  const c = $("filter"), ctx = clear(c);
  const top = Math.max(1.6, peak * 1.05);
  const py = (v) => c.height - 10 - (v / top) * (c.height - 20);
  ctx.strokeStyle = "#999";
  ctx.beginPath(); ctx.moveTo(0, py(1)); ctx.lineTo(c.width, py(1)); ctx.stroke();
  ctx.strokeStyle = "#27ae60"; ctx.lineWidth = 2;
  ctx.beginPath();
  y.forEach((v, i) => {
    const x = (i / y.length) * c.width;
    i ? ctx.lineTo(x, py(v)) : ctx.moveTo(x, py(v));
  });
  ctx.stroke();
}

await init();
$("gait").addEventListener("change", drawSchedule);
for (const id of ["height", "length"]) $(id).addEventListener("input", drawSwing);
for (const id of ["rise", "zeta"]) $(id).addEventListener("input", drawFilter);
drawSchedule();
drawSwing();
drawFilter();
