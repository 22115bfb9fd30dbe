import init, { Demo, lossDescent } from "./pkg/spix_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let demo = null;

function fail(where, e) {
  where.innerHTML = `<span class="err">${e}</span>`;
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  return ctx;
}

// Plots each series scaled to its own maximum so shapes are comparable.
function lines(canvas, xs, series) {
  const ctx = clear(canvas);
  const pad = 24, w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const xmax = Math.max(...xs, 1);
  for (const { values, color } of series) {
    const ymax = Math.max(...values.map(Math.abs), 1e-12);
    ctx.strokeStyle = color;
    ctx.beginPath();
    values.forEach((v, i) => {
      const x = pad + (xs[i] / xmax) * w, y = pad + h - (v / ymax) * h;
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  }
}

function sweepChart(canvas, rows) {
  const ctx = clear(canvas);
  const pad = 30, w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const slot = w / rows.length;
  const logMax = Math.log10(Math.max(...rows.map((r) => r.candidates_pre_mean), 10));
  ctx.font = "12px system-ui";
  rows.forEach((r, i) => {
    const bh = (Math.log10(Math.max(r.candidates_post_mean, 1)) / logMax) * h;
    ctx.fillStyle = "#ccc";
    ctx.fillRect(pad + i * slot + slot * 0.2, pad + h - bh, slot * 0.6, bh);
    ctx.fillStyle = "#444";
    ctx.fillText(`t=${r.threshold}`, pad + i * slot + slot * 0.35, canvas.height - 8);
  });
  for (const [key, color] of [["mrr_at_k", "#1f77b4"], ["sss_at_k", "#d62728"]]) {
    ctx.strokeStyle = ctx.fillStyle = color;
    ctx.beginPath();
    rows.forEach((r, i) => {
      const x = pad + (i + 0.5) * slot, y = pad + h - (r[key] ?? 0) * h;
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
      ctx.fillRect(x - 3, y - 3, 6, 6);
    });
    ctx.stroke();
  }
}

function table(el, headers, rows) {
  el.innerHTML =
    "<tr>" + headers.map((h) => `<th>${h}</th>`).join("") + "</tr>" +
    rows.map(([cls, cells]) => `<tr class="${cls}">` + cells.map((c) => `<td>${c}</td>`).join("") + "</tr>").join("");
}

function runSweep() {
  if (!demo) return;
  try {
    const rows = JSON.parse(demo.sweep(num("sw-dk"), num("sw-qk"), num("sw-reps")));
    sweepChart($("sw-chart"), rows);
    table(
      $("sw-table"),
      ["threshold", "candidates before", "after", "MRR@10", "SSS@10", "FLOPS", "latency (µs)"],
      rows.map((r) => ["", [
        r.threshold, r.candidates_pre_mean.toFixed(1), r.candidates_post_mean.toFixed(1),
        r.mrr_at_k.toFixed(4), (r.sss_at_k ?? 0).toFixed(4), r.flops.toFixed(3),
        (r.latency_mean_s * 1e6).toFixed(1),
      ]]),
    );
  } catch (e) {
    fail($("sw-table"), e);
  }
}

function runSearch() {
  if (!demo) return;
  $("q-tv").textContent = $("q-t").value;
  try {
    const v = JSON.parse(demo.search(num("q-id"), num("q-dk"), num("q-qk"), num("q-t"), num("q-n")));
    $("q-summary").textContent =
      `${v.query}: ${v.terms.length} terms, at least ${v.required_matches} must match; ` +
      `${v.candidates_pre_filter} candidates before the filter, ${v.candidates_post_filter} after. ` +
      `Relevant: ${v.relevant.join(", ") || "none"}`;
    $("q-terms").innerHTML = v.terms.map((t) => `<span>${t.term} ${t.weight.toFixed(2)}</span>`).join("");
    table(
      $("q-table"),
      ["rank", "document", "score", "matched terms"],
      v.hits.map((h) => [h.relevant ? "rel" : "", [h.rank, h.doc, h.score.toFixed(4), h.matched]]),
    );
  } catch (e) {
    $("q-terms").innerHTML = "";
    $("q-table").innerHTML = "";
    fail($("q-summary"), e);
  }
}

function runLoss() {
  try {
    const steps = JSON.parse(lossDescent(
      num("seed"), num("l-batch"), num("l-vocab"), num("l-lambda"), num("l-lr"), num("l-steps"),
    ));
    lines($("l-chart"), steps.map((s) => s.step), [
      { values: steps.map((s) => s.in_batch), color: "#1f77b4" },
      { values: steps.map((s) => s.flops), color: "#d62728" },
      { values: steps.map((s) => s.nonzero_fraction), color: "#2ca02c" },
    ]);
    const a = steps[0], b = steps[steps.length - 1];
    $("l-summary").textContent =
      `in-batch ${a.in_batch.toFixed(3)} → ${b.in_batch.toFixed(3)}, ` +
      `FLOPS ${a.flops.toFixed(3)} → ${b.flops.toFixed(4)}, ` +
      `nonzero ${(100 * a.nonzero_fraction).toFixed(1)}% → ${(100 * b.nonzero_fraction).toFixed(1)}%, ` +
      `mean squared term activation rate ${a.expected_overlap.toFixed(3)} → ${b.expected_overlap.toFixed(4)}`;
  } catch (e) {
    fail($("l-summary"), e);
  }
}

function regenerate() {
  $("status").textContent = "generating...";
  setTimeout(() => {
    try {
      demo?.free();
      demo = new Demo(num("seed"), num("docs"));
      $("q-id").max = demo.queryCount() - 1;
      $("status").textContent = `${num("docs")} documents, ${demo.queryCount()} queries`;
      runSweep();
      runSearch();
    } catch (e) {
      demo = null;
      fail($("status"), e);
    }
  });
}

await init();
$("generate").onclick = regenerate;
$("sw-run").onclick = runSweep;
for (const id of ["q-id", "q-dk", "q-qk", "q-t", "q-n"]) $(id).oninput = runSearch;
$("l-run").onclick = runLoss;
regenerate();
runLoss();
