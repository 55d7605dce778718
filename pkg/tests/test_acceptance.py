"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one PASS/FAIL line (collected into the pytest terminal
summary). Run directly with `python tests/test_acceptance.py` for the lines
alone.
"""
import itertools
import sys

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, BASE, model, spaced_points
from spinfreeze import cli
from spinfreeze.classical_rs import PhasePoint, equilibrium_report, q_integer_velocity
from spinfreeze.difference_ops import ProbeFunction, build_scalar_D, build_spin_D, commutator_residual
from spinfreeze.freezing import (
    FACE_REAL_REGIME,
    freeze,
    freezing_bracket_residual,
    hamiltonian_2_regrouped,
    hamiltonian_explicit,
    hamiltonian_oracle,
    identity_shift_check,
    real_spectrum_check,
    translation_invariance_residual,
)
from spinfreeze.hybrid_sim import HybridState, conservation_report, evolve, exact_conjugation
from spinfreeze.modular_family import BaseParams, ModularData, act, build_eval_context, modular_covariance_residual
from spinfreeze.r_matrices import PAULI
from spinfreeze.tensor_linalg import embed_one_site, frob, rel_diff


class Criterion:
    """Collects named checks; value < tol passes unless lower=True (negative control)."""

    def __init__(self, number: int, title: str, informative: bool = False):
        self.number = number
        self.title = title
        self.informative = informative
        self.checks = []

    def check(self, name, value, tol, lower=False):
        value = float(value)
        ok = value > tol if lower else value < tol
        self.checks.append((name, value, tol, lower, ok))
        return ok

    @property
    def ok(self):
        return all(c[-1] for c in self.checks)

    def line(self):
        failed = [c for c in self.checks if not c[-1]]
        if self.informative:
            status = "PASS" if self.ok else "FAIL (informative, non-blocking)"
        else:
            status = "PASS" if self.ok else "FAIL"
        if failed:
            shown, label = failed[:3], "failing"
        else:
            upper = [c for c in self.checks if not c[3]] or self.checks
            shown, label = [max(upper, key=lambda c: c[1] / c[2])], "tightest"
        detail = "; ".join(f"{n} {'>' if lo else '<'} {t:.0e}: {v:.2e}" for n, v, t, lo, _ in shown)
        return f"criterion {self.number:2d} [{self.title}]: {status} ({len(self.checks)} checks; {label}: {detail})"

    def finish(self):
        line = self.line()
        ACCEPTANCE_LINES.append(line)
        print(line)
        if not self.informative:
            assert self.ok, line


def _report_entries(argv):
    """Run the CLI suite into an in-memory report."""
    parser = cli.build_parser()
    args = parser.parse_args(argv)
    rep = cli.Report(argv[0], {}, None)
    args.func(args, rep)
    return rep.entries


def test_criterion_01_elliptic_kernel():
    c = Criterion(1, "elliptic kernel")
    for e in _report_entries(["theta-check", "--points", "50", "--seed", "1"]):
        c.check(e["name"], e["value"], e["tolerance"])
    c.finish()


def test_criterion_02_r_matrices():
    c = Criterion(2, "R-matrices")
    for e in _report_entries(["rmatrix-verify", "--points", "20", "--seed", "2", "--no-perms"]):
        c.check(e["name"], e["value"], e["tolerance"])
    c.finish()


def test_criterion_03_deformed_permutations():
    from spinfreeze.spin_permutations import all_perms, eta_limit_residual, inverse_identity_residual, word_independence_residual

    c = Criterion(3, "deformed permutations")
    rng = np.random.default_rng(3)
    for kind in ("vertex", "face"):
        par = model(4, face=kind == "face")
        x = spaced_points(rng, 4)
        perms = all_perms(4)
        c.check(f"{kind} reduced-word independence", max(word_independence_residual(w, x, kind, par) for w in perms), 1e-10)
        c.check(f"{kind} inverse identity", max(inverse_identity_residual(w, x, kind, par) for w in perms), 1e-10)
        c.check(f"{kind} eta->0", max(eta_limit_residual(w, x, kind, par) for w in perms), 1e-10)
    c.finish()


def _probes(rng, N, k=2, m=2):
    probes = [ProbeFunction(tuple(0.5 * rng.normal(size=N) + 0.5j * rng.normal(size=N))) for _ in range(k)]
    return probes, [spaced_points(rng, N) for _ in range(m)]


def test_criterion_04_scalar_commutativity():
    c = Criterion(4, "scalar Ruijsenaars commutativity")
    rng = np.random.default_rng(4)
    for N in (3, 4):
        par = model(N, r=1)
        ns = [n for n in range(-N, N + 1) if n]
        ops = {n: build_scalar_D(n, par) for n in ns}
        probes, points = _probes(rng, N)
        worst = max(commutator_residual(ops[n], ops[m], probes, points) for n, m in itertools.combinations(ns, 2))
        c.check(f"N={N} all pairs", worst, 1e-9)
    c.finish()


def test_criterion_05_spin_commutativity():
    c = Criterion(5, "spin Ruijsenaars commutativity")
    rng = np.random.default_rng(5)
    ns = (1, -1, 2)
    for kind in ("vertex", "face"):
        par = model(3, face=kind == "face")
        ops = {n: build_spin_D(n, kind, par) for n in ns}
        probes, points = _probes(rng, 3)
        for n, m in itertools.combinations(ns, 2):
            c.check(f"{kind} ({n},{m})", commutator_residual(ops[n], ops[m], probes, points), 1e-9)
    c.finish()


def test_criterion_06_equilibria():
    c = Criterion(6, "equilibria")
    rng = np.random.default_rng(6)
    for N in (3, 4, 5):
        for word in ("", "S"):
            ctx = build_eval_context(word, BASE, N, check=False)
            c.check(f"N={N} B={word or '1'}", ctx.report.max_residual(), 1e-10)
            bad = PhasePoint(ctx.pt.x + 0.02 * rng.normal(size=N), ctx.pt.p + 0.02 * rng.normal(size=N))
            c.check(f"N={N} B={word or '1'} perturbed (negative control)", equilibrium_report(bad, ctx.params).max_residual(), 1e-3, lower=True)
    for N in (3, 4, 5):
        eta, eps = 0.27, 0.6
        ctx = build_eval_context("", BaseParams(eta, eps, 8j * N), N)
        v = ctx.velocities[1]
        c.check(f"trig velocity N={N}", abs(v - q_integer_velocity(N, eta, eps / N)) / abs(v), 1e-6)
    c.finish()


def test_criterion_07_modular_covariance():
    c = Criterion(7, "modular covariance")
    rng = np.random.default_rng(7)
    for N in (3, 4):
        par = model(N)
        for _ in range(5):
            pt = PhasePoint(spaced_points(rng, N), 0.3 * rng.normal(size=N) + 0.1j * rng.normal(size=N))
            for n in range(1, N + 1):
                c.check(f"N={N} T n={n}", modular_covariance_residual("T", n, pt, par), 1e-10)
                c.check(f"N={N} S n={n}", modular_covariance_residual("S", n, pt, par), 1e-10)
    d = ModularData(
        spaced_points(rng, 4), rng.normal(size=4) + 1j * rng.normal(size=4), 0.27 + 0.05j, 0.6 + 0.1j, np.array([0.31 + 0.12j, -0.17 + 0.05j]), 0.15 + 1.2j
    )
    ref = d.as_array()
    for word in ("SSSS", "ST" * 6):
        c.check(f"{word[:4]}.. = 1 on data", np.max(np.abs(act(word, d).as_array() - ref)) / np.max(np.abs(ref)), 1e-12)
    c.finish()


def test_criterion_08_frozen_chains():
    c = Criterion(8, "frozen chains")
    rng = np.random.default_rng(8)
    for kind in ("vertex", "face"):
        for N in (4, 5):
            for word in ("", "S", "TS"):
                ch = freeze(kind, word, BASE, N)
                ctx = ch.context
                tag = f"{kind} N={N} B={word or '1'}"
                c.check(f"{tag} commutators", max(ch.commutator_residuals().values()), 1e-9)
                c.check(f"{tag} two-path coefficients", ch.residuals["coefficient_two_path"], 1e-10)
                c.check(f"{tag} H2 regrouped", rel_diff(hamiltonian_2_regrouped(ctx, kind), hamiltonian_explicit(2, ctx, kind)), 1e-10)
                if N == 4:
                    worst = max(rel_diff(hamiltonian_explicit(n, ctx, kind), hamiltonian_oracle(n, ctx, kind)) for n in ch.hamiltonians)
                    c.check(f"{tag} explicit vs hbar oracle", worst, 1e-8)
    for kind in ("vertex", "face"):
        par = model(3, face=kind == "face")
        for n in (1, -1, 2):
            x = spaced_points(rng, 3)
            p = 0.2 * rng.normal(size=3)
            c.check(f"{kind} N=3 translation n={n}", translation_invariance_residual(n, x, p, kind, par), 1e-9)
    c.finish()


def test_criterion_09_equilibrium_decoupling():
    c = Criterion(9, "equilibrium decoupling")
    for kind, word in (("vertex", ""), ("face", "S"), ("vertex", "S"), ("face", "")):
        ctx = freeze(kind, word, BASE, 3, n_range=[1]).context
        for n, m in ((1, 1), (2, -1)):
            c.check(f"{kind} B={word or '1'} ({n},{m})", freezing_bracket_residual(n, m, ctx, kind), 1e-9)
    ctx = freeze("vertex", "", BASE, 3, n_range=[1]).context
    off = PhasePoint(ctx.pt.x + np.array([0.05, -0.02, 0.01]), ctx.pt.p + np.array([0.1, 0.0, -0.05]))
    c.check("off-equilibrium (negative control)", freezing_bracket_residual(1, 1, ctx, "vertex", off), 1e-3, lower=True)
    c.finish()


def test_criterion_10_hybrid():
    c = Criterion(10, "hybrid simulator")
    rng = np.random.default_rng(10)
    for kind, word in (("vertex", ""), ("face", "S")):
        ch = freeze(kind, word, BASE, 3, n_range=[1])
        ctx, H = ch.context, ch.hamiltonians[1]
        A0 = embed_one_site(PAULI["z"], 1, 2, 3) + 0.3 * embed_one_site(PAULI["x"], 2, 2, 3)
        traj = evolve(HybridState(ctx.pt, A0), kind, ctx.params, 1.0, 0.02, monitor_every=10)
        rep = conservation_report(traj, ctx.params)
        tag = f"{kind} B={word or '1'}"
        c.check(f"{tag} relative coordinates", rep["relative_coordinates"], 1e-8)
        ex = exact_conjugation(H, A0, 1.0)
        c.check(f"{tag} spin vs exact conjugation", frob(traj[-1].A - ex) / frob(ex), 1e-6)
        c.check(f"{tag} D_m conserved", max(rep["D"].values()), 1e-8)
        errs = [frob(evolve(HybridState(ctx.pt, A0), kind, ctx.params, 1.0, dt, monitor_every=0)[-1].A - ex) for dt in (0.2, 0.1)]
        ratio = errs[0] / errs[1]
        c.check(f"{tag} dt-halving factor in [12, 20]", abs(ratio - 16), 4)
    # a moving (off-equilibrium) start makes D_m conservation non-trivial
    ctx = freeze("vertex", "", BASE, 3, n_range=[1]).context
    pt = PhasePoint(ctx.pt.x + 0.03 * rng.normal(size=3), ctx.pt.p + 0.05 * rng.normal(size=3))
    traj = evolve(HybridState(pt, np.eye(8)), "vertex", ctx.params, 1.0, 0.02, monitor_every=10)
    c.check("off-equilibrium D_m conserved", max(conservation_report(traj, ctx.params)["D"].values()), 1e-8)
    c.finish()


def test_criterion_11_informative():
    c = Criterion(11, "informative checks", informative=True)
    shift = identity_shift_check(BaseParams(BASE.eta, BASE.eps, BASE.omega), 4)
    for name, v in shift.items():
        c.check(f"vertex identity shift ({name})", v, 1e-8)
    c.check("face real spectrum H_1,S + H_-1,S", real_spectrum_check(FACE_REAL_REGIME, 4), 1e-8)
    c.finish()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
