import init, { plan, simulate, capacity } from "./pkg/formation_wasm.js";

const CASE_STUDY = `formation-instance 1
# Five vehicles in interlaced structure reshuffled by lane preference.
# Only node and edge conflicts are checked.
grid 3 3
mode 2
special none
# x y preference
vehicle 0 0 0
vehicle 0 2 0
vehicle 1 1 2
vehicle 2 0 2
vehicle 2 2 1
# x y, labelled by lane
target 0 0
target 0 2
target 1 1
target 2 0
target 2 2
`;

const LANE_COLOURS = ["#d33", "#2a2", "#36c", "#b8b", "#c80"];
const $ = (id) => document.getElementById(id);

let planned = null;
let timer = null;

function showError(el, e) {
  el.innerHTML = "";
  const span = document.createElement("span");
  span.className = "err";
  span.textContent = String(e.message ?? e);
  el.appendChild(span);
}

function renderLog(report) {
  const rows = report.log.map((r, i) =>
    `<tr><td>A${i + 1}</td><td>[${r.assignment.join(",")}]</td><td>${r.assignment_cost}</td>` +
    `<td>${r.path_cost ?? "unsolved"}</td></tr>`).join("");
  $("log").innerHTML = `<tr><th></th><th>assignment</th><th>cost</th><th>path cost</th></tr>${rows}`;
  const term = report.termination_cost == null ? "stream exhausted" : `stopped at assignment cost ${report.termination_cost}`;
  $("plan-summary").textContent =
    `best cost ${report.best_cost}, assignment [${report.best_assignment.join(",")}], ${term}, ` +
    `${report.nodes_generated} tree nodes`;
}

function drawGrid(step) {
  const c = $("grid"), g = c.getContext("2d");
  const { lanes, slots, paths, preferences } = planned;
  const cell = Math.min((c.width - 20) / lanes, (c.height - 20) / slots);
  g.clearRect(0, 0, c.width, c.height);
  g.strokeStyle = "#ccc";
  for (let y = 0; y < lanes; y++) {
    for (let x = 0; x < slots; x++) {
      // forward (larger x) is up
      g.strokeRect(10 + y * cell, 10 + (slots - 1 - x) * cell, cell, cell);
    }
  }
  paths.forEach((path, v) => {
    const [x, y] = path[Math.min(step, path.length - 1)];
    const cx = 10 + (y + 0.5) * cell, cy = 10 + (slots - 1 - x + 0.5) * cell;
    g.fillStyle = LANE_COLOURS[preferences[v] % LANE_COLOURS.length];
    g.beginPath();
    g.arc(cx, cy, cell * 0.32, 0, 2 * Math.PI);
    g.fill();
    g.fillStyle = "#fff";
    g.font = `${Math.round(cell * 0.3)}px sans-serif`;
    g.textAlign = "center";
    g.textBaseline = "middle";
    g.fillText(String(v + 1), cx, cy);
  });
  $("step-label").textContent = String(step);
}

function solve() {
  clearInterval(timer);
  const t0 = performance.now();
  try {
    planned = JSON.parse(plan($("instance").value));
  } catch (e) {
    planned = null;
    $("log").innerHTML = "";
    showError($("plan-summary"), e);
    return;
  }
  $("plan-status").textContent = `${(performance.now() - t0).toFixed(1)} ms`;
  renderLog(planned);
  const steps = planned.paths[0].length - 1;
  $("step").max = steps;
  $("step").value = 0;
  drawGrid(0);
}

function play() {
  if (!planned) return;
  clearInterval(timer);
  let s = 0;
  timer = setInterval(() => {
    $("step").value = s;
    drawGrid(s);
    if (++s > Number($("step").max)) clearInterval(timer);
  }, 600);
}

function drawHeat(report) {
  const c = $("heat"), g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const w = c.width / report.time_bins, h = c.height / report.space_bins;
  report.heatmap.forEach((row, i) => row.forEach((v, j) => {
    if (v == null) return;
    const k = Math.max(0, Math.min(1, v / 15));
    const shade = Math.round(30 + 215 * k);
    g.fillStyle = `rgb(${shade},${shade},${Math.min(255, shade + 20)})`;
    g.fillRect(j * w, c.height - (i + 1) * h, Math.ceil(w), Math.ceil(h));
  }));
}

function run() {
  const el = $("sim-summary");
  el.textContent = "running…";
  // let the status paint before the blocking call
  setTimeout(() => {
    const t0 = performance.now();
    let r;
    try {
      r = JSON.parse(simulate($("method").value, Number($("volume").value),
        Number($("seed").value) >>> 0, Number($("duration").value)));
    } catch (e) {
      showError(el, e);
      return;
    }
    const mean = r.mean_travel_s == null ? "–" : r.mean_travel_s.toFixed(2);
    el.textContent = `${r.generated} generated, ${r.exited} exited, ${r.on_road} still on the road; ` +
      `mean travel time ${mean} s; ${r.collisions} collisions; ${r.wrong_lane_exits} wrong-lane exits ` +
      `(${(performance.now() - t0).toFixed(0)} ms)`;
    drawHeat(r);
  }, 10);
}

function updateCapacity() {
  const vf = Number($("vf").value), df = Number($("df").value);
  $("cap").textContent = df > 0 && vf >= 0
    ? `upper bound ${capacity(vf, df).toFixed(0)} veh/(lane·h)`
    : "need d_F > 0";
}

await init();
$("instance").value = CASE_STUDY;
$("solve").onclick = solve;
$("play").onclick = play;
$("step").oninput = (e) => planned && drawGrid(Number(e.target.value));
$("run").onclick = run;
$("vf").oninput = $("df").oninput = updateCapacity;
updateCapacity();
solve();
