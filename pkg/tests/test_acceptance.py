"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to the session log, which is printed
in the terminal summary, and then asserts at the stated tolerance.
"""

import math
import time

import numpy as np
import pytest

from fsdim import machine as M
from fsdim.dimension import (
    block_chain,
    block_entropy_dimension,
    family_dimension,
    run_martingale,
    witness_martingale,
)
from fsdim.empirical import run_trace, state_gap
from fsdim.infotheory import conditional_entropy, conditional_kl, pinsker_gap
from fsdim.markov import induce_chain, stationary, stationary_sensitivity
from fsdim.selection import (
    agafonov_report,
    ap_selector,
    apply_selector,
    lambda_of,
    selection_lower_bound,
)
from fsdim.sequence import diluted, champernowne, generate

from conftest import MEGA, bits_of, random_machine, random_strongly_connected

FAMILY = "blocks:4+phase:2"
FIG1 = M.figure1()


def check(log, label, ok, detail):
    log.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    assert ok, detail


def test_c01_diluted_dimension(acceptance_log):
    t0 = time.perf_counter()
    x = generate(diluted(champernowne()), MEGA)
    rep = family_dimension(x, MEGA, FAMILY)
    elapsed = time.perf_counter() - t0
    ok = 0.45 <= rep.dim_est <= 0.55 and elapsed < 60
    check(acceptance_log, "C1 diluted dim_est in [0.45, 0.55], < 60 s", ok,
          f"dim_est={rep.dim_est:.4f} via {rep.witness_chain}, {elapsed:.2f} s")


def test_c02_normal_endpoint(acceptance_log):
    x = bits_of("champernowne")
    fam = family_dimension(x, MEGA, "blocks:8").dim_est
    be, _ = block_entropy_dimension(x, MEGA, max_block=8)
    ok = fam >= 0.9 and abs(fam - be) <= 0.1
    check(acceptance_log, "C2 champernowne dim_est >= 0.9, block entropy within 0.1", ok,
          f"family={fam:.4f}, block_entropy={be:.4f}")


def test_c03_state_convergence(acceptance_log):
    c = induce_chain(FIG1)
    normal = state_gap(c, run_trace(FIG1, bits_of("champernowne"), [MEGA]))
    b2 = block_chain(2)
    periodic = state_gap(induce_chain(b2), run_trace(b2, bits_of("periodic:01"), [MEGA]))
    ok = normal < 0.05 and periodic > 0.4
    check(acceptance_log, "C3 state_gap < 0.05 (normal), > 0.4 (periodic)", ok,
          f"champernowne={normal:.4f}, periodic 01={periodic:.4f}")


def test_c04_lambda_values(acceptance_log):
    got = [lambda_of(FIG1.with_selecting(s)) for s in ("a", "ac", "acd")]
    ok = all(abs(g - e) <= 1e-9 for g, e in zip(got, (0.25, 0.5, 0.75)))
    check(acceptance_log, "C4 lambda = 1/4, 1/2, 3/4 within 1e-9", ok,
          ", ".join(f"{g:.12f}" for g in got))


def test_c05_example_verdicts(acceptance_log):
    x = bits_of("diluted:champernowne")
    cases = (("a", 0.25, "fails_by"), ("ac", 0.50, "tight"), ("acd", 0.75, "strict"))
    ok, parts = True, []
    for states, lhs, verdict in cases:
        rep = agafonov_report(FIG1.with_selecting(states), x, MEGA, FAMILY)
        ok &= abs(rep.lhs - lhs) <= 0.07 and rep.verdict == verdict and abs(rep.dim_input - 0.5) <= 0.05
        parts.append(f"{{{states}}} lhs={rep.lhs:.4f} {rep.verdict} dim_input={rep.dim_input:.4f}")
    check(acceptance_log, "C5 lhs 0.25/0.50/0.75 +-0.07, fails/tight/strict", ok, "; ".join(parts))


def test_c06_exact_subsequence(acceptance_log):
    sel = apply_selector(FIG1.with_selecting("ac"), bits_of("diluted:champernowne"))
    same = np.array_equal(sel.selected, bits_of("champernowne", MEGA // 2))
    zeros = sel.complement.size == MEGA // 2 and not sel.complement.any()
    check(acceptance_log, "C6 S={a,c} outputs champernowne, complement all zeros", same and zeros,
          f"selected={sel.selected.size} bits exact={same}, complement zeros={zeros}")


def test_c07_capital_identity(acceptance_log):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        m = random_machine(rng)
        x = rng.integers(0, 2, 500).astype(np.uint8)
        pn = run_trace(m, x, [500]).final
        cap = run_martingale(witness_martingale(m, pn), x).final
        worst = max(worst, abs(cap - 500 * (1 - conditional_entropy(pn))) / 500)
    check(acceptance_log, "C7 log2 capital = n(1 - H) within 1e-6 n", worst <= 1e-6,
          f"max error / n = {worst:.2e} over 100 pairs")


def test_c08_pivot_identity(acceptance_log):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        m = random_machine(rng, max_states=10)
        nq = len(m)
        mass = rng.dirichlet(np.full(2 * nq, 0.5)).reshape(nq, 2)
        mass[rng.random((nq, 2)) < 0.2] = 0.0
        if mass.sum() == 0:
            mass[0, 0] = 1.0
        mass /= mass.sum()
        fair = np.full_like(mass, 0.5)
        worst = max(worst, abs(conditional_kl(mass, fair) + conditional_entropy(mass) - 1.0))
    check(acceptance_log, "C8 KL(mu||fair) + H(mu) = 1 within 1e-12", worst <= 1e-12,
          f"max error = {worst:.2e} over 1000 joints")


def _direct(m, x):
    cap, q, out = 1.0, m.start, [0.0]
    for b in x.tolist():
        beta = m.betting[q]
        cap *= 2 * (beta if b == 0 else 1 - beta)
        out.append(math.log2(cap) if cap > 0 else -math.inf)
        q = int(m.delta[q, b])
    return np.array(out)


def test_c09_oracle_equivalences(acceptance_log):
    rng = np.random.default_rng(9)
    solve_gap = 0.0
    for _ in range(100):
        c = induce_chain(random_strongly_connected(rng, max_states=10))
        gap = np.abs(stationary(c, "linear_solve") - stationary(c, "power_iteration")).sum()
        solve_gap = max(solve_gap, gap)
    mart_gap = 0.0
    for _ in range(100):
        m = random_machine(rng, betting=True)
        x = rng.integers(0, 2, 300).astype(np.uint8)
        mart_gap = max(mart_gap, np.abs(run_martingale(m, x).log2_capital - _direct(m, x)).max())
    violations = 0
    for i in range(1000):
        k = int(rng.integers(2, 6))
        p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        if i % 4 == 0:
            p[rng.integers(k)] = 0.0
            p /= p.sum()
        if i % 4 == 1:
            p = np.eye(k)[rng.integers(k)]
        if i % 10 == 2:
            q = p.copy()
        l1, bound = pinsker_gap(p, q)
        violations += l1 > bound + 1e-12
    ok = solve_gap <= 1e-9 and mart_gap <= 1e-9 and violations == 0
    check(acceptance_log, "C9 solve vs power, log-trace vs product, Pinsker", ok,
          f"stationary L1={solve_gap:.2e}, capital={mart_gap:.2e}, Pinsker violations={violations}")


def test_c10_irreducible_completion(acceptance_log):
    rng = np.random.default_rng(10)
    done, sel_bad, cap_gap = 0, 0, 0.0
    while done < 50:
        m = random_machine(rng, betting=True)
        if M.ergodic_analysis(m).irreducible and len(M.ergodic_analysis(m).ergodic_sets[0]) == len(m):
            continue
        if len(M.ergodic_analysis(m).classes) == 1:
            continue
        m = m.with_selecting([q for q in range(len(m)) if rng.random() < 0.5])
        w = M.absorption_prefix(m)
        c = M.irreducible_completion(m, w)
        x = np.concatenate([np.array([int(b) for b in w], dtype=np.uint8),
                            rng.integers(0, 2, 200 - len(w)).astype(np.uint8)])
        for n in range(len(w), 201):
            a, b = apply_selector(m, x[:n]), apply_selector(c, x[:n])
            sel_bad += not (np.array_equal(a.selected, b.selected)
                            and np.array_equal(a.complement, b.complement))
        ta, tb = run_martingale(m, x).log2_capital, run_martingale(c, x).log2_capital
        tail = slice(len(w), None)
        fin = np.isfinite(ta[tail])
        same_inf = np.array_equal(fin, np.isfinite(tb[tail]))
        cap_gap = max(cap_gap, np.abs(ta[tail][fin] - tb[tail][fin]).max(initial=0.0))
        sel_bad += not same_inf
        done += 1
    ok = sel_bad == 0 and cap_gap <= 1e-9
    check(acceptance_log, "C10 completion preserves selections and capital", ok,
          f"50 reducible machines, selection mismatches={sel_bad}, capital gap={cap_gap:.2e}")


@pytest.mark.parametrize("source", ["diluted:champernowne", "champernowne"])
def test_c11_progression_bound(acceptance_log, source):
    x = bits_of(source)
    ok, parts = True, []
    for d in (2, 3):
        for j in range(d):
            lb = selection_lower_bound(ap_selector(d, j), x, MEGA, FAMILY)
            ok &= lb.measured >= lb.bound - 0.05
            parts.append(f"d={d},j={j}: {lb.measured:.4f}>={lb.bound:.4f}")
    check(acceptance_log, f"C11 selected dim >= bound - 0.05 on {source}", ok, "; ".join(parts))


def test_c12_stationary_continuity(acceptance_log):
    rng = np.random.default_rng(12)
    bad = 0
    for _ in range(20):
        m = random_strongly_connected(rng, max_states=10)
        while len(m) < 2:
            # a one-state chain has pi = (1) under every perturbation
            m = random_strongly_connected(rng, max_states=10)
        p = induce_chain(m).matrix
        r = rng.dirichlet(np.ones(len(p)), size=len(p))
        gaps = [stationary_sensitivity(p, (1 - t) * p + t * r)[1] for t in (1e-2, 1e-4, 1e-6)]
        bad += not gaps[0] > gaps[1] > gaps[2]
    check(acceptance_log, "C12 ||pi - pi'||_1 strictly decreasing in perturbation", bad == 0,
          f"{20 - bad}/20 chains strictly decreasing")
