import init, { select_fields, combine_votes, explore } from "./pkg/fortag_web.js";

const $ = (id) => document.getElementById(id);

const DISTRIBUTIONS = {"two_digit": {"01": 0.004, "02": 0.032, "03": 0.113, "04": 0.012, "05": 0.009, "06": 0.168, "07": 0.031, "08": 0.006, "09": 0.089, "10": 0.011, "11": 0.518, "13": 0.002, "14": 0.003, "15": 0.005, "16": 0.008, "17": 0.072, "19": 0.001, "20": 0.002, "21": 0.001, "22": 0.003, "MD": 0.081}, "four_digit": {"06": {"0601": 0.054, "0602": 0.008, "0603": 0.006, "0604": 0.012, "0605": 0.021, "0606": 0.007, "0607": 0.005, "0608": 0.005, "0699": 0.002}, "11": {"1101": 0.012, "1102": 0.033, "1103": 0.199, "1104": 0.008, "1105": 0.011, "1106": 0.009, "1107": 0.013, "1108": 0.01, "1109": 0.045, "1110": 0.014, "1111": 0.009, "1112": 0.037, "1113": 0.007, "1114": 0.026, "1115": 0.041, "1116": 0.01, "1117": 0.074}}};

const TRAINING = `__label__Cardiology heart rhythm atrial fibrillation
__label__Cardiology atrial heart failure ejection
__label__Cardiology coronary artery heart stent
__label__Neurology brain neuron cortex stroke
__label__Neurology cortex brain seizure epilepsy
__label__Neurology stroke brain lesion neuron
`;

const CHANNELS = [
  ["title", "Neurosciences", 0.9],
  ["abstract", "Neurosciences", 0.55],
  ["keywords", "Clinical Sciences", 0.8],
  ["mesh", "Clinical Sciences", 0.7],
  ["journal_title", "Clinical Sciences", 0.6],
];

function table(rows, headers) {
  const head = `<tr>${headers.map((h) => `<th>${h}</th>`).join("")}</tr>`;
  const body = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table>${head}${body}</table>`;
}

function guard(out, f) {
  try {
    out.innerHTML = f();
  } catch (e) {
    out.innerHTML = `<p class="error">${e}</p>`;
  }
}

function runSelect() {
  guard($("select-out"), () => {
    const req = {
      distributions: JSON.parse($("dist").value),
      threshold_2digit: Number($("t2").value),
      threshold_4digit: Number($("t4").value),
      drill_down: $("drill").value.split(",").map((s) => s.trim()).filter(Boolean),
    };
    const scheme = JSON.parse(select_fields(JSON.stringify(req)));
    return table(scheme.fields.map((f) => [f.label, f.source_codes.join(" "), f.share.toFixed(3)]), ["field", "codes", "share"]);
  });
}

function runCombine() {
  guard($("combine-out"), () => {
    const votes = CHANNELS.map(([channel]) => {
      const label = $(`label-${channel}`).value.trim();
      return { channel, label: label || null, probability: Number($(`prob-${channel}`).value) };
    });
    const res = JSON.parse(combine_votes(JSON.stringify({ votes, threshold: Number($("vt").value) })));
    return `<p>final: <b>${res.label ?? "none"}</b> (voting: ${res.voters.join(", ") || "none"})</p>`;
  });
}

function runExplore() {
  guard($("explore-out"), () => {
    const an = $("an").value.trim().split(/\s+/);
    const req = {
      training: $("training").value,
      text: $("text").value,
      word: $("word").value,
      analogy: an.length === 3 ? an : null,
      k: 3,
    };
    const res = JSON.parse(explore(JSON.stringify(req)));
    const rows = (xs) => xs.map((x) => [x.item, x.score.toFixed(4)]);
    return `<p>${res.vocabulary} words in vocabulary</p>` +
      table(rows(res.labels), ["label", "probability"]) +
      table(rows(res.neighbors), ["neighbor", "cosine"]) +
      table(rows(res.analogy), ["analogy", "cosine"]);
  });
}

async function main() {
  await init();
  $("dist").value = JSON.stringify(DISTRIBUTIONS, null, 2);
  $("training").value = TRAINING;
  for (const [channel, label, p] of CHANNELS) {
    const row = $("votes").insertRow();
    row.innerHTML = `<td>${channel}</td><td><input id="label-${channel}" value="${label}"></td>` +
      `<td><input id="prob-${channel}" type="number" step="0.05" min="0" max="1" value="${p}"></td>`;
  }
  $("select").onclick = runSelect;
  $("combine").onclick = runCombine;
  $("explore").onclick = runExplore;
  runSelect();
  runCombine();
  runExplore();
}

main();
