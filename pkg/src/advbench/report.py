"""Markdown rendering of sweep results and the analysis document."""

from .trend import FAMILIES


def _pct(v):
    return "n/a" if v is None else f"{100 * v:.2f}%"


def _table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines)


def render_report(result, analysis=None, manifests=()):
    """Render Tables 1/3/4/9/10/12-style summaries as one markdown document.

    ``manifests`` is a sequence of ``(name, RunManifest)`` pairs listed under
    provenance. Output depends only on the inputs, so re-rendering unchanged
    inputs is byte-identical.
    """
    models = result.model_ids
    out = ["# Adversarial robustness report", ""]

    out += ["## Benign accuracy", ""]
    benign = [(m, result.benign(m)) for m in models if result.benign(m) is not None]
    if benign:
        out.append(_table(["model", "accuracy"], [(m, _pct(v)) for m, v in benign]))
    else:
        out.append("_No benign (epsilon = 0) records in the results._")
    out.append("")

    out += ["## Accuracy under FGSM", ""]
    eps = sorted({e for m in models for e in result.epsilons(m) if e > 0})
    rows = [[f"{e:g}"] + [_pct(result.pooled(m, e)) for m in models] for e in eps]
    out += [_table(["epsilon"] + models, rows), ""]

    if not analysis:
        out += ["## Analysis", "", "_Analysis absent: no fits were supplied._", ""]
    else:
        corr = analysis["correlation"]
        ids = corr["model_ids"]
        out += [f"## Correlation between models ({corr['statistic']})", ""]
        rows = [[a] + [f"{corr['matrix'][i][j]:.5f}" for j in range(len(ids))]
                for i, a in enumerate(ids)]
        out += [_table(["model"] + ids, rows), ""]

        out += ["## Constant fits (mean accuracy over the full grid)", ""]
        out += [_table(["model", "mean accuracy"],
                       [(m, f"{v:.2f}%") for m, v in analysis["constant_fit_percent"].items()]), ""]

        for key, window in analysis["windows"].items():
            out += [f"## Fits for epsilon <= {key}", ""]
            eq_rows, r2_rows = [], []
            for m, fams in window["fits"].items():
                eq_rows.append([m] + [fams[f].get("equation", "-") for f in FAMILIES])
                r2_rows.append([m] + [f"{fams[f]['r2']:.3f}" if "r2" in fams[f] else "-"
                                      for f in FAMILIES])
            out += ["### Equations", "", _table(["model"] + list(FAMILIES), eq_rows), ""]
            out += ["### r squared", "", _table(["model"] + list(FAMILIES), r2_rows), ""]
            quad = window["quadratic"]
            if quad:
                rows = []
                for m, q in quad.items():
                    d = q["derivative"]
                    sign = "-" if d["intercept"] < 0 else "+"
                    vertex = "none" if q["minimum"] is None else f"{q['minimum']:.3f}"
                    rows.append([m, f"{d['slope']:.3f}x {sign} {abs(d['intercept']):.3f}",
                                 f"{q['deceleration']:.3f}", vertex])
                out += ["### Rate of decline and deceleration", "",
                        _table(["model", "slope line", "deceleration", "quadratic minimum"], rows),
                        ""]
            if window["intersections"]:
                rows = [(" / ".join(e["models"]),
                         f"{e['epsilon']:.3f}" if "epsilon" in e else e["error"])
                        for e in window["intersections"]]
                out += ["### Slope-line intersections", "", _table(["pair", "epsilon"], rows), ""]
            ratio = window.get("deceleration_ratio")
            if ratio:
                out += [f"Deceleration of {ratio['model']} relative to the mean of "
                        f"{', '.join(ratio['versus'])}: {ratio['ratio']:.3f}", ""]

    out += ["## Provenance", ""]
    if manifests:
        for name, man in manifests:
            out.append(f"- `{name}`: `{' '.join(man.command)}` (advbench {man.toolkit_version})")
    else:
        out.append("_No run manifests found next to the inputs._")
    out.append("")
    return "\n".join(out)
