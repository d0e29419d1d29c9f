import init, { mrmr, ensemble, shapley } from "./pkg/unicrop_demo.js";

const $ = (id) => document.getElementById(id);
const nums = (s) => s.split(",").map((v) => v.trim()).filter((v) => v !== "").map(Number);
const rows = (s) => s.split("\n").map((l) => l.trim()).filter((l) => l !== "").map(nums);
const fmt = (x) => (Math.abs(x) >= 1000 ? x.toFixed(0) : x.toPrecision(4));

function guard(out, fn) {
  try {
    fn();
  } catch (e) {
    out.innerHTML = `<p class="err">${e}</p>`;
  }
}

function table(head, body) {
  const th = head.map((h) => `<th>${h}</th>`).join("");
  const tr = body.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${tr}</table>`;
}

function bar(v, max) {
  const w = max > 0 ? Math.round((120 * Math.abs(v)) / max) : 0;
  return `<span class="bar${v < 0 ? " neg" : ""}" style="width:${w}px"></span>`;
}

function sampleTable() {
  const lines = ["rain,rain_copy,temp,lai,noise,yield"];
  for (let i = 0; i < 150; i++) {
    const rain = 100 + 40 * Math.random();
    const temp = 25 + 5 * Math.random();
    const lai = 2 + 3 * Math.random();
    const noise = Math.random();
    const y = 20 * rain + 300 * lai - 50 * (temp - 27) ** 2 + 200 * Math.random();
    lines.push([rain, rain * 1.02 + Math.random(), temp, lai, noise, y].map((v) => v.toFixed(3)).join(","));
  }
  $("mrmr-csv").value = lines.join("\n");
}

function runMrmr() {
  const out = $("mrmr-out");
  guard(out, () => {
    const res = JSON.parse(
      mrmr(JSON.stringify({ csv: $("mrmr-csv").value, k: Number($("mrmr-k").value), criterion: $("mrmr-criterion").value })),
    );
    const max = Math.max(...res.selected.map((s) => s.relevance));
    out.innerHTML =
      `<p>${res.rows} rows, criterion ${res.criterion}</p>` +
      table(
        ["rank", "feature", "relevance", "", "redundancy", "score"],
        res.selected.map((s) => [s.rank, s.name, fmt(s.relevance), bar(s.relevance, max), fmt(s.redundancy), fmt(s.score)]),
      );
  });
}

function runEnsemble() {
  const out = $("ens-out");
  guard(out, () => {
    const res = JSON.parse(ensemble(JSON.stringify({ y: nums($("ens-y").value), predictions: rows($("ens-preds").value) })));
    out.innerHTML =
      table(
        ["model", "weight", "", "SSE alone"],
        res.weights.map((w, i) => [`model ${i + 1}`, w.toFixed(4), bar(w, 1), fmt(res.member_sse[i])]),
      ) + `<p>blend SSE ${fmt(res.objective)}</p>`;
  });
}

function runShapley() {
  const out = $("sh-out");
  guard(out, () => {
    const interactions = $("sh-int")
      .value.split(",")
      .map((t) => t.trim())
      .filter((t) => t !== "")
      .map((t) => {
        const [i, j, c] = t.split(":").map(Number);
        return [i, j, c];
      });
    const req = {
      bias: Number($("sh-bias").value),
      linear: nums($("sh-linear").value),
      interactions,
      x: nums($("sh-x").value),
      background: rows($("sh-bg").value),
    };
    const res = JSON.parse(shapley(JSON.stringify(req)));
    const max = Math.max(...res.phi.map(Math.abs));
    out.innerHTML =
      table(
        ["feature", "x", "φ", ""],
        res.phi.map((p, j) => [`x${j}`, req.x[j], fmt(p), bar(p, max)]),
      ) + `<p>base ${fmt(res.base)} + Σφ ${fmt(res.phi.reduce((a, b) => a + b, 0))} = f(x) ${fmt(res.prediction)} (gap ${res.efficiency_gap.toExponential(1)})</p>`;
  });
}

await init();
sampleTable();
$("ens-y").value = "10, 12, 15, 11, 18, 20, 14";
$("ens-preds").value = "11, 12, 14, 12, 17, 19, 15\n9, 13, 16, 10, 19, 21, 13\n14, 14, 14, 14, 14, 14, 14";
$("mrmr-sample").onclick = () => {
  sampleTable();
  runMrmr();
};
$("mrmr-run").onclick = runMrmr;
$("ens-run").onclick = runEnsemble;
$("sh-run").onclick = runShapley;
runMrmr();
runEnsemble();
runShapley();
