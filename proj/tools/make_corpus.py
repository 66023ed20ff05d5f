#!/usr/bin/env python3
"""Writes the deterministic seed corpus used by the benchmark and the parser tests.

corpus/seeds/      compile-clean documents that errors get injected into
corpus/roundtrip/  awkward but legal sources for the lossless round-trip tests

Rerunning with the same --seed rewrites byte-identical files.
"""

import argparse
import pathlib
import random

TOPICS = [
    ("sparse", "sparse recovery", "signal", "measurement"),
    ("graph", "graph partitioning", "vertex", "cut"),
    ("kernel", "kernel regression", "sample", "bandwidth"),
    ("fluid", "incompressible flow", "cell", "pressure"),
    ("queue", "queueing networks", "server", "arrival"),
    ("lattice", "lattice models", "site", "coupling"),
    ("optim", "convex optimisation", "iterate", "step size"),
    ("robot", "motion planning", "pose", "trajectory"),
    ("genome", "sequence alignment", "read", "score"),
    ("market", "auction design", "bidder", "reserve price"),
    ("wave", "wave propagation", "mode", "frequency"),
    ("crypto", "lattice cryptography", "key", "modulus"),
]

WORDS = ("the method converges quickly under mild assumptions and the analysis extends "
         "to the noisy case without further effort while the constants remain explicit "
         "we compare against two baselines and report the median over ten runs "
         "each experiment uses a fixed budget so the comparison is fair").split()


class Doc:
    def __init__(self, rng, topic):
        self.rng = rng
        self.short, self.title, self.thing, self.param = topic
        self.packages = []  # (options, name)
        self.preamble = []
        self.body = []
        self.labels = []
        self.bib = []
        self.counter = 0

    def use(self, name, options=None):
        if not any(n == name for _, n in self.packages):
            self.packages.append((options, name))

    def sentence(self, n=None):
        n = n or self.rng.randint(8, 16)
        start = self.rng.randrange(len(WORDS))
        words = [WORDS[(start + i) % len(WORDS)] for i in range(n)]
        words[0] = words[0].capitalize()
        return " ".join(words) + "."

    def label(self, prefix):
        self.counter += 1
        key = f"{prefix}:{self.short}{self.counter}"
        self.labels.append(key)
        return key

    def render(self, docclass):
        out = [f"\\documentclass{docclass}"]
        for opts, name in self.packages:
            out.append(f"\\usepackage[{opts}]{{{name}}}" if opts else f"\\usepackage{{{name}}}")
        out.extend(self.preamble)
        out.append("")
        out.append("\\begin{document}")
        out.append("")
        out.append(f"\\section{{Introduction}}\\label{{sec:{self.short}intro}}")
        out.append("")
        out.extend(self.body)
        if self.bib:
            out.append("\\begin{thebibliography}{9}")
            for key, text in self.bib:
                out.append(f"\\bibitem{{{key}}} {text}")
            out.append("\\end{thebibliography}")
            out.append("")
        out.append("\\end{document}")
        return "\n".join(out) + "\n"


def para_math(d):
    v = d.rng.choice(["x", "y", "u", "w"])
    s = d.rng.choice([
        f"Let ${v}_i$ denote the {d.thing} and write $\\alpha + \\beta = 1$ for the weights.",
        f"For every {d.thing} we have ${v}^2 \\leq 2{v} + 1$ whenever ${v} > 0$.",
        f"The {d.param} $\\lambda$ is chosen so that $\\sum_{{i=1}}^n {v}_i = \\lambda n$.",
        f"We write $\\|{v}\\|$ for the norm and $\\langle {v}, z \\rangle$ for the inner product.",
    ])
    d.body += [d.sentence() + " " + s + " " + d.sentence(), ""]


def equation(d):
    key = d.label("eq")
    d.body += [
        "\\begin{equation}",
        f"  f(x) = \\frac{{1}}{{n}} \\sum_{{i=1}}^{{n}} (x - x_i)^2 \\label{{{key}}}",
        "\\end{equation}",
        f"Equation~\\ref{{{key}}} is minimised by the mean. " + d.sentence(),
        "",
    ]


def display(d):
    d.body += [d.sentence(), "\\[", "  E = \\int_0^1 g(t)\\, dt", "\\]", d.sentence(), ""]


def align(d):
    d.use("amsmath")
    key = d.label("eq")
    env = d.rng.choice(["align", "align*", "gather"])
    lab = f" \\label{{{key}}}" if env != "align*" else ""
    if env == "gather":
        lines = ["  a = b + c" + lab + " \\\\", "  c = d"]
    else:
        lines = ["  a &= b + c" + lab + " \\\\", "  &\\leq 2 \\max(b, c)"]
    d.body += [f"\\begin{{{env}}}"] + lines + [f"\\end{{{env}}}"]
    if env != "align*":
        d.body.append(f"By \\eqref{{{key}}} the bound follows. " + d.sentence())
    d.body.append("")


def reals(d):
    d.use("amssymb")
    d.preamble.append("\\newcommand{\\R}{\\mathbb{R}}")
    d.body += [f"Each {d.thing} lives in $\\R^n$ and the {d.param} in $\\R$. " + d.sentence(), ""]


def macro(d):
    name = d.rng.choice(["method", "tool", "algo", "sys"])
    d.preamble.append(f"\\newcommand{{\\{name}}}{{\\textsc{{{d.short.capitalize()}}}}}")
    d.body += [f"We call our approach \\{name}{{}} throughout. " + d.sentence(),
               f"In short, \\{name}{{}} is simple. " + d.sentence(), ""]


def items(d):
    env = d.rng.choice(["itemize", "enumerate"])
    lines = [f"\\begin{{{env}}}"]
    for _ in range(d.rng.randint(2, 4)):
        lines.append(f"  \\item {d.sentence(6)}")
    if d.rng.random() < 0.5:
        lines += ["  \\item Nested points:", "  \\begin{itemize}", f"    \\item {d.sentence(5)}",
                  "", f"    \\item {d.sentence(5)}", "  \\end{itemize}"]
    lines.append(f"\\end{{{env}}}")
    d.body += [d.sentence()] + lines + [""]


def enumitem_list(d):
    d.use("enumitem")
    d.body += ["\\begin{enumerate}[label=(\\roman*)]", f"  \\item {d.sentence(6)}", f"  \\item {d.sentence(6)}",
               "\\end{enumerate}", ""]


def table(d):
    booktabs = d.rng.random() < 0.6
    if booktabs:
        d.use("booktabs")
    key = d.label("tab")
    cols = d.rng.choice(["lcc", "lrr", "lccc", "lr"])
    n = len(cols)
    top, mid, bot = ("\\toprule", "\\midrule", "\\bottomrule") if booktabs else ("\\hline", "\\hline", "\\hline")
    head = " & ".join(["Method"] + [f"Set {i}" for i in range(1, n)]) + " \\\\"
    rows = []
    for r in range(d.rng.randint(2, 4)):
        vals = [f"{d.rng.randint(10, 99)}.{d.rng.randint(0, 9)}" for _ in range(n - 1)]
        rows.append("    " + " & ".join([f"Run {r + 1}"] + vals) + " \\\\")
    d.body += [
        f"Table~\\ref{{{key}}} lists the results. " + d.sentence(),
        "",
        "\\begin{table}[t]",
        "  \\centering",
        f"  \\caption{{Results for {d.title}.}}",
        f"  \\label{{{key}}}",
        f"  \\begin{{tabular}}{{{cols}}}",
        f"    {top}",
        "    " + head,
        f"    {mid}",
    ] + rows + [
        f"    {bot}",
        "  \\end{tabular}",
        "\\end{table}",
        "",
    ]


def figure(d):
    key = d.label("fig")
    d.body += [
        "\\begin{figure}[h]",
        "  \\centering",
        "  \\fbox{\\rule{0pt}{2cm}\\rule{3cm}{0pt}}",
        f"  \\caption{{Overview of the {d.param}.}}",
        f"  \\label{{{key}}}",
        "\\end{figure}",
        f"Figure~\\ref{{{key}}} sketches the setup. " + d.sentence(),
        "",
    ]


def subfigures(d):
    d.use("caption")
    d.use("subcaption")
    key = d.label("fig")
    d.body += [
        "\\begin{figure}[t]",
        "  \\centering",
        "  \\begin{subfigure}{0.45\\linewidth}",
        "    \\fbox{small}",
        "    \\caption{Before.}",
        "  \\end{subfigure}",
        "  \\begin{subfigure}{0.45\\linewidth}",
        "    \\fbox{large}",
        "    \\caption{After.}",
        "  \\end{subfigure}",
        f"  \\caption{{Two views of each {d.thing}.}}",
        f"  \\label{{{key}}}",
        "\\end{figure}",
        "",
    ]


def theorem(d):
    if d.rng.random() < 0.5:
        d.use("amsmath")
        d.use("amsthm")
        proof = True
    else:
        proof = False
    if not any("newtheorem{theorem}" in p for p in d.preamble):
        d.preamble.append("\\newtheorem{theorem}{Theorem}")
    key = d.label("thm")
    d.body += [
        "\\begin{theorem}\\label{" + key + "}",
        f"  Every {d.thing} with positive {d.param} admits a bound of order $1/n$.",
        "\\end{theorem}",
    ]
    if proof:
        d.body += ["\\begin{proof}", "  " + d.sentence(), "\\end{proof}"]
    d.body += [f"Theorem~\\ref{{{key}}} is the main result. " + d.sentence(), ""]


def citations(d):
    keys = [f"{d.short}{y}" for y in d.rng.sample(range(1990, 2024), 3)]
    for k in keys:
        d.bib.append((k, f"A. Author. On {d.title}. Journal of Results, {k[-4:]}."))
    d.body += [f"Earlier work~\\cite{{{keys[0]}}} studied the {d.param}. " + d.sentence(),
               f"See also \\cite{{{keys[1]},{keys[2]}}} for related bounds.", ""]


def natbib_cites(d):
    d.use("natbib")
    keys = [f"{d.short}{y}" for y in d.rng.sample(range(1990, 2024), 2)]
    for k in keys:
        d.bib.append((k, f"B. Writer. Notes on {d.title}. Proceedings, {k[-4:]}."))
    d.body += [f"As shown by \\citet{{{keys[0]}}}, the {d.thing} matters \\citep{{{keys[1]}}}.", ""]


def cleveref(d):
    d.use("hyperref")
    d.use("cleveref")
    d.body += [f"\\Cref{{sec:{d.short}intro}} motivates the {d.param}. " + d.sentence(),
               f"Code is at \\url{{https://example.org/{d.short}}}.", ""]


def units(d):
    d.use("siunitx")
    d.body += [f"The {d.param} was set to \\SI{{{d.rng.randint(2, 90)}}}{{ms}} "
               f"and we ran \\num{{{d.rng.randint(1000, 90000)}}} trials. " + d.sentence(), ""]


def colour(d):
    d.use("xcolor")
    d.body += [f"Changes are marked in \\textcolor{{blue}}{{blue}}. " + d.sentence(), ""]


def t1(d):
    d.use("fontenc", "T1")
    d.body += [f"We thank Andr\\'e and J\\\"urgen for the na\\\"ive {d.thing} examples. " + d.sentence(), ""]


def algo2e(d):
    d.use("algorithm2e", "ruled")
    d.body += [
        "\\begin{algorithm}",
        f"  \\KwIn{{a {d.thing} $x$}}",
        "  \\KwOut{the score}",
        "  \\Return $f(x)$\\;",
        f"  \\caption{{Scoring each {d.thing}.}}",
        "\\end{algorithm}",
        "",
    ]


def quote(d):
    d.body += ["\\begin{quote}", "  " + d.sentence(), "\\end{quote}", ""]


def section(d, name):
    key = d.label("sec")
    d.body += [f"\\section{{{name}}}\\label{{{key}}}", ""]


BLOCKS = [para_math, equation, display, align, reals, macro, items, enumitem_list, table, figure,
          subfigures, theorem, citations, natbib_cites, cleveref, units, colour, t1, algo2e, quote]

# (packages) → what must come before what
ORDER = ["fontenc", "amsmath", "amssymb", "amsthm", "enumitem", "booktabs", "siunitx", "xcolor", "caption",
         "subcaption", "algorithm2e", "natbib", "hyperref", "cleveref"]


def make_seed(rng, index):
    d = Doc(rng, TOPICS[index % len(TOPICS)])
    # every seed gets the core blocks so each category has something to break
    core = [para_math, table, rng.choice([equation, align]), items, rng.choice([citations, natbib_cites])]
    extra = rng.sample([b for b in BLOCKS if b not in core], rng.randint(3, 6))
    plan = core + extra
    rng.shuffle(plan)
    d.body += [d.sentence(), ""]
    for i, block in enumerate(plan):
        if i and i % 3 == 0:
            section(d, rng.choice(["Method", "Analysis", "Experiments", "Discussion", "Setup"]))
        block(d)
    if rng.random() < 0.5:
        d.use("amsmath")
    d.packages.sort(key=lambda p: ORDER.index(p[1]) if p[1] in ORDER else len(ORDER))
    cls = rng.choice(["{article}", "[11pt]{article}", "{article}", "[a4paper]{article}"])
    return d.render(cls)


ROUNDTRIP = {
    "comments_and_percent.tex":
        "\\documentclass{article} % trailing comment\n%% full line\n\\begin{document}\n"
        "Fifty\\% off % not this\n\\end{document}\n",
    "verbatim_braces.tex":
        "\\documentclass{article}\n\\begin{document}\n\\verb|{unbalanced| and \\verb+$+\n"
        "\\begin{verbatim}\n}{ $ \\end{itemize}\n\\end{verbatim}\n\\end{document}\n",
    "crlf_lines.tex":
        "\\documentclass{article}\r\n\\begin{document}\r\nLine one.\r\n\r\n$a+b$\r\n\\end{document}\r\n",
    "no_trailing_newline.tex": "\\documentclass{article}\n\\begin{document}\nEnd.\n\\end{document}",
    "utf8_text.tex":
        "\\documentclass{article}\n\\usepackage[T1]{fontenc}\n\\begin{document}\n"
        "Caf\u00e9 na\u00efve \u00fcber, and a tab\there.\n\\end{document}\n",
    "nested_math.tex":
        "\\documentclass{article}\n\\usepackage{amsmath}\n\\begin{document}\n"
        "$\\text{if $x$ holds}$ and \\(y\\) and \\[ z \\] and $$w$$\n"
        "\\begin{align}\n  a &= \\begin{cases} 1 & x>0 \\\\ 0 & \\text{else} \\end{cases}\n\\end{align}\n"
        "\\end{document}\n",
    "optional_args.tex":
        "\\documentclass[12pt,twocolumn]{article}\n\\usepackage[margin=1in]{geometry}\n"
        "\\begin{document}\n\\section*[short]{Long title}\n\\item[x] stray-looking but inside nothing\n"
        "\\\\[2pt] \\\\* text\n\\end{document}\n",
    "escaped_specials.tex":
        "\\documentclass{article}\n\\begin{document}\n\\{ \\} \\$ \\& \\# \\_ \\textbackslash{} ~ -- ---\n"
        "\\end{document}\n",
    "deep_groups.tex":
        "\\documentclass{article}\n\\begin{document}\n{{{{\\bf a}}}} {\\em {\\it b}}\n\\end{document}\n",
    "blank_lines_in_lists.tex":
        "\\documentclass{article}\n\\begin{document}\n\\begin{itemize}\n\n  \\item a\n\n\n  \\item b\n\n"
        "\\end{itemize}\n\\end{document}\n",
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "corpus"))
    ap.add_argument("--count", type=int, default=64)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    seeds = out / "seeds"
    rt = out / "roundtrip"
    seeds.mkdir(parents=True, exist_ok=True)
    rt.mkdir(parents=True, exist_ok=True)
    for old in list(seeds.glob("*.tex")):
        old.unlink()

    rng = random.Random(args.seed)
    for i in range(args.count):
        topic = TOPICS[i % len(TOPICS)][0]
        (seeds / f"s{i:03d}_{topic}.tex").write_bytes(make_seed(rng, i).encode("utf-8"))
    for name, text in ROUNDTRIP.items():
        (rt / name).write_bytes(text.encode("utf-8"))
    print(f"wrote {args.count} seeds and {len(ROUNDTRIP)} round-trip files under {out}")


if __name__ == "__main__":
    main()
