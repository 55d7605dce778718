"""Command-line verification suites and builders.

Exit codes: 0 all residuals within tolerance, 1 residual breach, 2 usage
error, 3 numerical abort (pole, degeneracy, non-analytic input, rejected step).
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classical_rs import NonAnalyticError, PhasePoint
from .difference_ops import ProbeFunction, build_scalar_D, build_spin_D, commutator_residual
from .elliptic_kernel import (
    DegeneracyError,
    PoleError,
    as_lattice,
    jacobi_imaginary_residual,
    jacobi_imaginary_scale,
    kronecker_phi,
    theta,
    theta_addition_residual,
    theta_addition_scale,
    theta_quasiperiod_residual,
    theta_value,
)
from .freezing import (
    freeze,
    freezing_bracket_residual,
    hamiltonian_2_regrouped,
    hamiltonian_explicit,
    hamiltonian_oracle,
    translation_invariance_residual,
)
from .hybrid_sim import HybridState, StepRejected, conservation_report, evolve, exact_conjugation
from .modular_family import BaseParams, EquilibriumError, build_eval_context
from .r_matrices import ModelParams, RKind, distance_commutator, r_check, r_vertex, unitarity_residual, ybe_residual
from .spin_permutations import all_perms, eta_limit_residual, inverse_identity_residual, word_independence_residual
from .tensor_linalg import (
    comm_norm,
    flip,
    frob,
    matrix_from_json,
    matrix_to_json,
    read_matrix_bin,
    reconstruction_residual,
    rel_diff,
    write_matrix_bin,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_BREACH, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (PoleError, DegeneracyError, NonAnalyticError, StepRejected, ZeroDivisionError)

DEFAULTS = {
    "eta": "0.27+0.05j",
    "eps": "0.6+0.1j",
    "omega": "0.15+1.2j",
    "a": "0.31+0.12j,-0.17+0.05j",
    "tau": "0.15+1.2j",
}


class UsageError(Exception):
    pass


def cplx(s) -> complex:
    try:
        return complex(str(s).replace(" ", ""))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a complex number: {s!r}") from e


def cplx_list(s) -> tuple:
    s = str(s).strip()
    return tuple(cplx(v) for v in s.split(",")) if s else ()


def int_list(s) -> tuple:
    s = str(s).strip()
    return tuple(int(v) for v in s.split(",")) if s else ()


def to_jsonable(v):
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, np.ndarray):
        return [to_jsonable(z) for z in v.tolist()]
    if isinstance(v, dict):
        return {str(k): to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_jsonable(z) for z in v]
    return v


class Report:
    """Residual entries {name, value, tolerance, pass, identity} plus free-form data."""

    def __init__(self, command: str, params: dict, tol_override: float | None = None):
        self.header = {"command": command, "version": __version__, "params": params}
        self.entries = []
        self.data = {}
        self.error = None
        self.tol_override = tol_override

    def add(self, name: str, value: float, tol: float, identity: str, informative: bool = False):
        tol = self.tol_override if self.tol_override is not None else tol
        value = float(value)
        e = {"name": name, "value": value, "tolerance": tol, "pass": bool(value < tol), "identity": identity}
        if informative:
            e["informative"] = True
        self.entries.append(e)
        return e["pass"]

    def add_lower(self, name: str, value: float, bound: float, identity: str):
        """Negative control: passes when value exceeds bound."""
        value = float(value)
        self.entries.append(
            {"name": name, "value": value, "tolerance": bound, "pass": bool(value > bound), "identity": identity, "lower_bound": True}
        )

    @property
    def ok(self) -> bool:
        return self.error is None and all(e["pass"] for e in self.entries if not e.get("informative"))

    def to_dict(self) -> dict:
        d = {"header": self.header, "ok": self.ok, "entries": self.entries, "data": self.data}
        if self.error is not None:
            d["error"] = self.error
        return to_jsonable(d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _echo(args) -> dict:
    skip = {"func", "config", "cmd", "sub"}
    return {k: to_jsonable(v) for k, v in sorted(vars(args).items()) if k not in skip}


def _write_text(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text if text.endswith("\n") else text + "\n")


def _rng(args):
    return np.random.default_rng(int(args.seed) % 2 ** 64)


def _base(args) -> BaseParams:
    return BaseParams(args.eta, args.eps, args.omega, tuple(args.a))


# theta-check


def _theta_points(rng, tau, n):
    t = as_lattice(tau).tau
    re = rng.uniform(-0.5, 0.5, n)
    im = rng.uniform(-0.4, 0.4, n) * t.imag
    return re + 1j * im


def cmd_theta_check(args, rep: Report):
    rng = _rng(args)
    tau = args.tau
    tol = 1e-10
    xs = _theta_points(rng, tau, args.points)
    ys, zs, ws = (_theta_points(rng, tau, args.points) for _ in range(3))
    odd, quasi1, quasi2, add, jac, jacn, kr1, kr2 = ([] for _ in range(8))
    t = as_lattice(tau).tau
    for x, y, z, w in zip(xs, ys, zs, ws):
        tx = theta_value(x, tau)
        odd.append(abs(theta_value(-x, tau) + tx) / abs(tx))
        r1, r2 = theta_quasiperiod_residual(x, tau)
        quasi1.append(abs(r1) / abs(tx))
        quasi2.append(abs(r2) / abs(theta_value(x + t, tau)))
        add.append(abs(theta_addition_residual(x, y, z, w, tau)) / theta_addition_scale(x, y, z, w, tau))
        jac.append(abs(jacobi_imaginary_residual(x, tau)) / jacobi_imaginary_scale(x, tau))
        jacn.append(abs(jacobi_imaginary_residual(x, tau, True)) / jacobi_imaginary_scale(x, tau, True))
        f = kronecker_phi(x, y, tau)
        kr1.append(abs(kronecker_phi(x + 1, y, tau) - f) / abs(f))
        kr2.append(abs(kronecker_phi(x + t, y, tau) - np.exp(-2j * np.pi * y) * f) / abs(f))
    rep.add("oddness", max(odd), tol, "theta(-x) = -theta(x)")
    rep.add("derivative_at_zero", abs(theta(0.0, tau).derivative - 1), tol, "theta'(0) = 1")
    rep.add("quasiperiod_1", max(quasi1), tol, "theta(x+1) = -theta(x)")
    rep.add("quasiperiod_tau", max(quasi2), tol, "theta(x+tau) = -p^-1 e^{-2 pi i x} theta(x)")
    rep.add("addition", max(add), tol, "three-term theta addition formula")
    rep.add("jacobi_imaginary", max(jac), tol, "Jacobi imaginary transformation of vartheta_1")
    rep.add("jacobi_imaginary_normalised", max(jacn), tol, "S-transformation of theta with theta'(0) = 1")
    rep.add("kronecker_quasiperiod_1", max(kr1), tol, "phi(u+1, v) = phi(u, v)")
    rep.add("kronecker_quasiperiod_tau", max(kr2), tol, "phi(u+tau, v) = e^{-2 pi i v} phi(u, v)")
    trig = abs(theta_value(0.3, 5j) - np.sin(0.3 * np.pi) / np.pi)
    rep.add("trig_limit", trig, 1e-6, "theta(x|tau) -> sin(pi x)/pi as Im tau grows")


# rmatrix-verify


def _kinds(s: str):
    return [RKind.VERTEX, RKind.FACE] if s == "both" else [RKind.parse(s)]


def _u_points(rng, n, tau, lo=0.1, hi=0.9):
    t = as_lattice(tau).tau
    return rng.uniform(lo, hi, n) + 1j * rng.uniform(-0.2, 0.2, n) * t.imag


def cmd_rmatrix_verify(args, rep: Report):
    rng = _rng(args)
    tol = 1e-10
    N = max(args.N, 4)
    for kind in _kinds(args.kind):
        par = ModelParams(args.eta, 1.0, args.tau, r=args.r, N=N, dyn_a=tuple(args.a) if kind is RKind.FACE else ())
        us = _u_points(rng, args.points, args.tau)
        vs = _u_points(rng, args.points, args.tau)
        k = kind.value
        rep.add(f"{k}.unitarity", max(unitarity_residual(kind, 1, u, par) for u in us), tol, "P(u) P(-u) = 1")
        rep.add(f"{k}.ybe", max(ybe_residual(kind, 1, u, v, par) for u, v in zip(us, vs)), tol, "braided Yang-Baxter equation")
        rep.add(
            f"{k}.distance_commutativity",
            max(distance_commutator(kind, 1, 3, u, v, par) for u, v in zip(us, vs)),
            tol,
            "[P_{i,i+1}(u), P_{j,j+1}(v)] = 0 for |i-j| > 1",
        )
        small = par.with_(eta=1e-5)
        P = flip(args.r)
        # the O(eta) correction grows like 1/u near the lattice, so stay in the cell interior
        uc = _u_points(rng, args.points, args.tau, 0.25, 0.75)
        rep.add(
            f"{k}.small_eta",
            max(rel_diff(r_check(kind, u, small, None if kind is RKind.VERTEX else small.a_vec())[0], P) for u in uc),
            1e-4,
            "R(u) -> 1 as eta -> 0",
        )
        if kind is RKind.VERTEX:
            R = r_vertex(us[0], par)[0]
            r = args.r
            bad = sum(
                1
                for a, g, b, d in itertools.product(range(r), repeat=4)
                if (a + g - b - d) % r and R[a * r + g, b * r + d] != 0
            )
            rep.add(f"{k}.ice_rule_violations", bad, 0.5, "R nonzero only for alpha+gamma = beta+delta mod r")
        if args.perms:
            x = np.arange(4) / 4 + rng.uniform(-0.05, 0.05, 4) + 1j * rng.uniform(-0.05, 0.05, 4)
            p4 = par.with_(N=4)
            perms = all_perms(4)
            rep.add(f"{k}.reduced_word_independence", max(word_independence_residual(w, x, kind, p4) for w in perms), tol, "P_w independent of the reduced word")
            rep.add(f"{k}.inverse_identity", max(inverse_identity_residual(w, x, kind, p4) for w in perms), tol, "P_w(x)^{-1} = P_{w^{-1}}(w^{-1} x)")
            rep.add(f"{k}.eta_degeneration", max(eta_limit_residual(w, x, kind, p4) for w in perms), tol, "P_w -> plain permutation at eta = 0")


# ops-verify


def _probe_setup(rng, N, n_probes, n_points):
    probes = [ProbeFunction(tuple(0.5 * rng.normal(size=N) + 0.5j * rng.normal(size=N))) for _ in range(n_probes)]
    points = [np.arange(N) / N + rng.uniform(-0.05, 0.05, N) + 1j * rng.uniform(-0.05, 0.05, N) for _ in range(n_points)]
    return probes, points


def cmd_ops_verify(args, rep: Report):
    rng = _rng(args)
    tol = 1e-9
    scalar_Ns = args.scalar_N
    for N in scalar_Ns:
        par = ModelParams(args.eta, args.eps, args.tau, r=1, N=N, hbar=args.hbar)
        ns = [n for n in range(-N, N + 1) if n]
        ops = {n: build_scalar_D(n, par) for n in ns}
        probes, points = _probe_setup(rng, N, args.probes, args.points)
        worst = 0.0
        for n, m in itertools.combinations(ns, 2):
            worst = max(worst, commutator_residual(ops[n], ops[m], probes, points))
        rep.add(f"scalar.N{N}", worst, tol, "[D_n, D_m] = 0")
    if args.spin_N:
        N = args.spin_N
        ns = sorted(set(args.pairs_from))
        for kind in _kinds(args.kind):
            par = ModelParams(args.eta, args.eps, args.tau, r=2, N=N, hbar=args.hbar, dyn_a=tuple(args.a) if kind is RKind.FACE else ())
            ops = {n: build_spin_D(n, kind, par) for n in ns}
            probes, points = _probe_setup(rng, N, args.probes, args.points)
            for n, m in itertools.combinations(ns, 2):
                rep.add(f"{kind.value}.N{N}.({n},{m})", commutator_residual(ops[n], ops[m], probes, points), tol, "[D~_n, D~_m] = 0")


# equilibrium


def cmd_equilibrium(args, rep: Report):
    ctx = build_eval_context(args.B_word, _base(args), args.N, args.r, check=False, tol=1e-10)
    r = ctx.report
    for n, v in r.spread.items():
        rep.add(f"spread.{n}", v, 1e-10, "velocities i-independent")
    for n, v in r.jerk.items():
        rep.add(f"jerk.{n}", v, 1e-10, "vanishing jerks")
    for n, v in r.dual_residual.items():
        rep.add(f"dual.{n}", v, 1e-10, "v_{N-n}/(N-n) = v_n/n")
    for n, v in r.parity_residual.items():
        rep.add(f"parity.{n}", v, 1e-10, "v_n even in eta")
    rep.data.update(
        {"x": ctx.pt.x, "p": ctx.pt.p, "eta": ctx.params.eta, "eps": ctx.params.epsilon, "tau": ctx.params.t, "velocities": ctx.velocities, "v_minus_1": ctx.v_m1}
    )


# chain


def _n_range(args, N):
    return list(args.n_range) if args.n_range else [n for n in range(-(N - 1), N) if n]


def _chain_suite(chain, rep: Report, rng, oracle: bool):
    ctx = chain.context
    kind = chain.kind
    for (n, m), v in chain.commutator_residuals().items():
        rep.add(f"commutator.({n},{m})", v, 1e-9, "[H_n, H_m] = 0")
    rep.add("coefficient_two_path", chain.residuals["coefficient_two_path"], 1e-10, "i eps A_I gamma_I = closed form in v_1")
    N = chain.N
    if 2 in chain.hamiltonians or N >= 3:
        rep.add("h2_regrouped", rel_diff(hamiltonian_2_regrouped(ctx, kind), hamiltonian_explicit(2, ctx, kind)), 1e-10, "regrouped H_2")
    x = ctx.pt.x + 0.03 * (rng.normal(size=N) + 1j * rng.normal(size=N))
    p = ctx.pt.p + 0.1 * rng.normal(size=N)
    rep.add("translation", translation_invariance_residual(1, x, p, kind, ctx.params), 1e-9, "sum_j d_j of the order-hbar term = 0")
    rep.add("bracket_at_equilibrium", freezing_bracket_residual(1, 1, ctx, kind), 1e-9, "{D_1, order-hbar term} = 0 at equilibrium")
    if oracle:
        for n in chain.hamiltonians:
            if 2 * abs(n) <= N:
                rep.add(f"oracle.{n}", rel_diff(hamiltonian_explicit(n, ctx, kind), hamiltonian_oracle(n, ctx, kind)), 1e-8, "explicit H_n = hbar-extraction")


def _chain_from_args(args):
    kind = RKind.parse(args.kind)
    base = _base(args) if kind is RKind.FACE else BaseParams(args.eta, args.eps, args.omega)
    return freeze(kind, args.B_word, base, args.N, args.r, _n_range(args, args.N), hbar=args.hbar)


def cmd_chain_build(args, rep: Report):
    chain = _chain_from_args(args)
    _chain_suite(chain, rep, _rng(args), args.oracle)
    ctx = chain.context
    rep.data["context"] = {"x": ctx.pt.x, "p": ctx.pt.p, "eta": ctx.params.eta, "eps": ctx.params.epsilon, "tau": ctx.params.t}
    rep.data["equilibrium_residual"] = ctx.report.max_residual()
    if args.format == "bin":
        if args.out is None:
            raise UsageError("--format bin needs --out DIR")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files = {}
        for n, H in chain.hamiltonians.items():
            fn = f"H_{n}.bin"
            write_matrix_bin(out / fn, H)
            files[n] = fn
        rep.data["files"] = files
    else:
        rep.data["hamiltonians"] = {n: matrix_to_json(H) for n, H in chain.hamiltonians.items()}


def _load_chain(path: Path):
    path = Path(path)
    rep_path = path / "report.json" if path.is_dir() else path
    d = json.loads(rep_path.read_text())
    data = d["data"]
    if "hamiltonians" in data:
        Hs = {int(n): matrix_from_json(M) for n, M in data["hamiltonians"].items()}
    else:
        Hs = {int(n): read_matrix_bin(rep_path.parent / fn) for n, fn in data["files"].items()}
    return d["header"]["params"], Hs


def cmd_chain_verify(args, rep: Report):
    params, Hs = _load_chain(args.input)
    for a, b in itertools.combinations(sorted(Hs), 2):
        rep.add(f"saved_commutator.({a},{b})", comm_norm(Hs[a], Hs[b]), 1e-9, "[H_n, H_m] = 0")
    ns = argparse.Namespace(**{**vars(args), **_params_from_echo(params)})
    ns.n_range = tuple(sorted(Hs))
    chain = _chain_from_args(ns)
    for n, H in Hs.items():
        rep.add(f"rebuild.{n}", rel_diff(H, chain.hamiltonians[n]), 1e-12, "saved matrix reproduces")
    _chain_suite(chain, rep, _rng(ns), args.oracle)


def _params_from_echo(params: dict) -> dict:
    out = {}
    for k in ("kind", "N", "r", "B_word", "seed"):
        out[k] = params[k]
    for k in ("eta", "eps", "omega", "hbar"):
        out[k] = complex(*params[k])
    out["a"] = tuple(complex(*z) for z in params["a"])
    return out


def cmd_chain_spectrum(args, rep: Report):
    if args.input:
        _, Hs = _load_chain(args.input)
    else:
        args.n_range = tuple(sorted(set(args.combo)))
        Hs = _chain_from_args(args).hamiltonians
    H = sum(Hs[n] for n in args.combo)
    w, V = np.linalg.eig(H)
    order = np.lexsort((w.imag, w.real))
    w, V = w[order], V[:, order]
    rep.add("reconstruction", reconstruction_residual(H, w, V), 1e-9, "H V = V diag(w)")
    rep.data["eigenvalues"] = w
    rep.data["max_relative_imag"] = float(np.max(np.abs(w.imag)) / max(np.max(np.abs(w)), 1e-300))


# hybrid


def _observable(name: str, r: int, N: int) -> np.ndarray:
    from .r_matrices import PAULI
    from .tensor_linalg import embed_one_site

    if r != 2:
        return np.eye(r ** N, dtype=complex)
    return embed_one_site(PAULI[name], 1, r, N)


def cmd_hybrid_evolve(args, rep: Report):
    kind = RKind.parse(args.kind)
    base = _base(args) if kind is RKind.FACE else BaseParams(args.eta, args.eps, args.omega)
    ctx = build_eval_context(args.B_word, base, args.N, args.r, args.hbar)
    pt = ctx.pt
    if args.x0 or args.p0:
        if len(args.x0) != args.N or len(args.p0) != args.N:
            raise UsageError("--x0 and --p0 need N entries each")
        pt = PhasePoint(np.array(args.x0), np.array(args.p0))
    A0 = _observable(args.observable, args.r, args.N)
    traj = evolve(HybridState(pt, A0), kind, ctx.params, args.t_end, args.dt, sample_every=args.sample_every, monitor_every=args.monitor_every)
    cons = conservation_report(traj, ctx.params)
    for m, v in cons["D"].items():
        rep.add(f"conserved.D{m}", v, 1e-8, "D_m^cl constant along the flow")
    rep.add("trace_powers", cons["trace_powers"], 1e-8, "tr A^k constant under similarity flow")
    at_eq = not (args.x0 or args.p0)
    if at_eq:
        rep.add("relative_coordinates", cons["relative_coordinates"], 1e-8, "x_i - x_j frozen at equilibrium")
        H = freeze(kind, args.B_word, base, args.N, args.r, [1], hbar=args.hbar).hamiltonians[1]
        ex = exact_conjugation(H, A0, traj[-1].t)
        rep.add("spin_vs_exact", frob(traj[-1].A - ex) / frob(ex), 1e-6, "A(t) = e^{iHt} A e^{-iHt}")
    buf = io.StringIO()
    w = csv.writer(buf)
    N = args.N
    w.writerow(["t"] + [f"{c}{i}_{part}" for c in ("x", "p") for i in range(1, N + 1) for part in ("re", "im")] + ["A00_re", "A00_im", "trA_re", "trA_im"])
    for s in traj:
        row = [f"{s.t:.12g}"]
        for vec in (s.pt.x, s.pt.p):
            for z in vec:
                row += [repr(float(z.real)), repr(float(z.imag))]
        a00, tr = s.A[0, 0], np.trace(s.A)
        row += [repr(float(a00.real)), repr(float(a00.imag)), repr(float(tr.real)), repr(float(tr.imag))]
        w.writerow(row)
    rep.data["csv"] = buf.getvalue()
    rep.data["steps"] = len(traj) - 1


# parser


def _add_model_args(p, kind=True, face_default="vertex"):
    if kind:
        p.add_argument("--kind", default=face_default, choices=["vertex", "face"])
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--eta", type=cplx, default=DEFAULTS["eta"])
    p.add_argument("--eps", type=cplx, default=DEFAULTS["eps"])
    p.add_argument("--omega", type=cplx, default=DEFAULTS["omega"])
    p.add_argument("--a", type=cplx_list, default=DEFAULTS["a"], help="comma-separated dynamical parameters (face)")
    p.add_argument("--hbar", type=cplx, default="0.37")
    p.add_argument("--B-word", dest="B_word", default="", help="modular word over S, T, s, t")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None, help="override every tolerance")
    common.add_argument("--out", default=None)
    common.add_argument("--format", default="json", choices=["json", "csv", "bin"])
    common.add_argument("--config", default=None, help="key=value file; flags override it")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="spinfreeze", description="Elliptic spin Ruijsenaars operators and frozen spin chains.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("theta-check", parents=[common], help="elliptic kernel identities")
    p.add_argument("--tau", type=cplx, default=DEFAULTS["tau"])
    p.add_argument("--points", type=int, default=50)
    p.set_defaults(func=cmd_theta_check)

    p = sub.add_parser("rmatrix-verify", parents=[common], help="R-matrix and deformed permutation identities")
    p.add_argument("--kind", default="both", choices=["vertex", "face", "both"])
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--eta", type=cplx, default=DEFAULTS["eta"])
    p.add_argument("--tau", type=cplx, default=DEFAULTS["tau"])
    p.add_argument("--a", type=cplx_list, default=DEFAULTS["a"])
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--no-perms", dest="perms", action="store_false", help="skip the S_4 deformed-permutation checks")
    p.set_defaults(func=cmd_rmatrix_verify)

    p = sub.add_parser("ops-verify", parents=[common], help="commutativity of difference operators on probes")
    p.add_argument("--kind", default="both", choices=["vertex", "face", "both"])
    p.add_argument("--eta", type=cplx, default=DEFAULTS["eta"])
    p.add_argument("--eps", type=cplx, default=DEFAULTS["eps"])
    p.add_argument("--tau", type=cplx, default=DEFAULTS["tau"])
    p.add_argument("--a", type=cplx_list, default=DEFAULTS["a"])
    p.add_argument("--hbar", type=cplx, default="0.37")
    p.add_argument("--scalar-N", dest="scalar_N", type=int_list, default="3,4")
    p.add_argument("--spin-N", dest="spin_N", type=int, default=3)
    p.add_argument("--pairs-from", dest="pairs_from", type=int_list, default="1,-1,2")
    p.add_argument("--probes", type=int, default=2)
    p.add_argument("--points", type=int, default=2)
    p.set_defaults(func=cmd_ops_verify)

    p = sub.add_parser("equilibrium", parents=[common], help="equilibrium residual report")
    _add_model_args(p, kind=False)
    p.set_defaults(func=cmd_equilibrium)

    p = sub.add_parser("chain", help="frozen spin chains")
    csub = p.add_subparsers(dest="sub", required=True)
    for name, func in (("build", cmd_chain_build), ("verify", cmd_chain_verify), ("spectrum", cmd_chain_spectrum)):
        q = csub.add_parser(name, parents=[common])
        _add_model_args(q)
        q.add_argument("--n-range", dest="n_range", type=int_list, default="")
        q.add_argument("--oracle", action="store_true", help="also compare with the hbar-extraction oracle")
        if name != "build":
            q.add_argument("--in", dest="input", default=None, required=name == "verify", help="report.json or bin directory from chain build")
        if name == "spectrum":
            q.add_argument("--combo", type=int_list, default="1,-1", help="sum of H_n to diagonalise")
        q.set_defaults(func=func)

    p = sub.add_parser("hybrid", help="hybrid classical-spin evolution")
    hsub = p.add_subparsers(dest="sub", required=True)
    q = hsub.add_parser("evolve", parents=[common])
    _add_model_args(q)
    q.set_defaults(N=3)
    q.add_argument("--x0", type=cplx_list, default="")
    q.add_argument("--p0", type=cplx_list, default="")
    q.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    q.add_argument("--dt", type=float, default=0.02)
    q.add_argument("--sample-every", dest="sample_every", type=int, default=5)
    q.add_argument("--monitor-every", dest="monitor_every", type=int, default=10)
    q.add_argument("--observable", default="z", choices=["x", "y", "z"], help="Pauli matrix at site 1")
    q.set_defaults(func=cmd_hybrid_evolve)
    return parser


def read_config(path) -> dict:
    cfg = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected key=value")
        k, v = line.split("=", 1)
        cfg[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return cfg


def _leaf_parser(parser, argv):
    """Subparser that will handle argv (for applying config defaults)."""
    p = parser
    for tok in argv:
        acts = [a for a in p._actions if isinstance(a, argparse._SubParsersAction)]
        if acts and tok in acts[0].choices:
            p = acts[0].choices[tok]
    return p


def _apply_config(parser, argv):
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    cfg = read_config(known.config)
    leaf = _leaf_parser(parser, argv)
    dests = {a.dest for a in leaf._actions}
    unknown = sorted(set(cfg) - dests)
    if unknown:
        raise UsageError(f"unknown config keys {unknown}")
    for a in leaf._actions:
        if a.dest in cfg and isinstance(a, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            v = cfg[a.dest].lower()
            if v not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {a.dest} expects a boolean")
            cfg[a.dest] = v in ("true", "1", "yes")
    leaf.set_defaults(**cfg)


def _emit(args, rep: Report):
    text = rep.dumps()
    if args.cmd == "hybrid":
        csv_text = rep.data.pop("csv", "")
        text = rep.dumps()
        if args.out:
            _write_text(args.out, csv_text)
            _write_text(str(args.out) + ".report.json", text)
        else:
            sys.stdout.write(csv_text)
            sys.stderr.write(text + "\n")
        return
    if args.format == "bin" and args.out:
        _write_text(Path(args.out) / "report.json", text)
    else:
        _write_text(args.out, text)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except (UsageError, OSError, argparse.ArgumentTypeError) as e:
        print(f"spinfreeze: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    name = args.cmd + (f" {args.sub}" if getattr(args, "sub", None) else "")
    rep = Report(name, _echo(args), args.tol)
    code = EXIT_OK
    try:
        args.func(args, rep)
        code = EXIT_OK if rep.ok else EXIT_BREACH
    except UsageError as e:
        print(f"spinfreeze: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EquilibriumError as e:
        rep.error = {"type": "EquilibriumError", "message": str(e)}
        code = EXIT_BREACH
    except NUMERIC_ERRORS as e:
        rep.error = {"type": type(e).__name__, "message": str(e)}
        code = EXIT_NUMERIC
    except ValueError as e:
        print(f"spinfreeze: {e}", file=sys.stderr)
        return EXIT_USAGE
    _emit(args, rep)
    return code


def main():
    sys.exit(run())
