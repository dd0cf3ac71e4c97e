"""Command-line experiment runner.

Every command is a pure function of its configuration and ``--seed``:
parameters come from built-in defaults, then an optional ``--config`` JSON
file, then explicit flags.  Reports embed the resolved configuration and a
hash of the package sources, and are written byte-for-byte reproducibly.

Exit codes: ``0`` success, ``2`` invalid configuration or input file,
``3`` an asserted bound failed inside a suite.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .errors import QMoneyError

REPORT_SCHEMA = "qmoney.report/1"
EXIT_OK, EXIT_CONFIG, EXIT_SUITE = 0, 2, 3


class ConfigProblem(Exception):
    """Raised for anything that should exit with code 2."""


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def code_hash() -> str:
    """SHA-256 over the package sources (sorted by file name)."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Counter-based generator for the named stream of a seed.

    Streams with different names are independent; the same ``(seed, name)``
    always yields the same sequence.
    """
    ss = np.random.SeedSequence([int(seed) & (2 ** 64 - 1), zlib.crc32(name.encode())])
    return np.random.Generator(np.random.Philox(ss))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


@dataclass
class Report:
    result: dict
    rows: list = field(default_factory=list)
    passed: bool = True


def render(command: str, config: dict, seed: int, rep: Report, fmt: str) -> str:
    envelope = {"schema": REPORT_SCHEMA, "command": command, "seed": seed,
                "config": config, "version": __version__, "code_hash": code_hash(),
                "passed": rep.passed, "result": rep.result, "rows": rep.rows}
    envelope = _jsonable(envelope)
    if fmt == "json":
        return json.dumps(envelope, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        rows = envelope["rows"]
        cols = sorted({k for r in rows for k in r})
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v
                        for k, v in r.items()})
        return buf.getvalue()
    if fmt == "md":
        lines = [f"# {command}", "",
                 f"- seed: {seed}", f"- code: {envelope['code_hash']}",
                 f"- passed: {rep.passed}",
                 f"- config: `{json.dumps(envelope['config'], sort_keys=True)}`", ""]
        summary = {k: v for k, v in envelope["result"].items()
                   if not isinstance(v, (list, dict))}
        for k in sorted(summary):
            lines.append(f"- {k}: {summary[k]}")
        rows = envelope["rows"]
        if rows:
            cols = sorted({k for r in rows for k in r})
            lines += ["", "| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
            for r in rows:
                lines.append("| " + " | ".join(str(r.get(c, "")) for c in cols) + " |")
        return "\n".join(lines) + "\n"
    raise ConfigProblem(f"unknown format {fmt!r}")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigProblem(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigProblem(f"{path} is not valid JSON: {exc}") from exc


def resolve_config(defaults: dict, config_path: str | None, overrides: dict) -> dict:
    cfg = dict(defaults)
    if config_path:
        loaded = _load_json(config_path)
        if not isinstance(loaded, dict):
            raise ConfigProblem("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ConfigProblem(f"unknown config keys: {unknown}")
        cfg.update(loaded)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


# ---------------------------------------------------------------------------
# invariant commands
# ---------------------------------------------------------------------------

def _load_invariant(cfg: dict):
    from .invariant import WalkableInvariant, cyclic_invariant, hypercube_invariant, product_invariant
    if cfg.get("descriptor"):
        try:
            return WalkableInvariant.from_json(_load_json(cfg["descriptor"]))
        except (KeyError, TypeError) as exc:
            raise ConfigProblem(f"malformed descriptor: {exc}") from exc
    spec = str(cfg.get("builtin") or "cycle:6")
    kind, *args = spec.split(":")
    try:
        nums = [int(a) for a in args]
        if kind == "cycle":
            return cyclic_invariant(*nums)
        if kind == "hypercube":
            return hypercube_invariant(*nums)
        if kind == "product":
            return product_invariant(*nums)
    except (TypeError, ValueError) as exc:
        raise ConfigProblem(f"bad builtin invariant {spec!r}: {exc}") from exc
    raise ConfigProblem(f"unknown builtin invariant {spec!r}")


def _or(value, default):
    return default if value is None else value


def _serial_str(y) -> str:
    return json.dumps(_jsonable(y))


def cmd_orbits(cfg: dict, seed: int) -> Report:
    from .invariant import compute_orbits, walk_spectrum
    w = _load_invariant(cfg)
    rows = []
    for o in compute_orbits(w):
        sp = walk_spectrum(w, o)
        rows.append({"serial": _serial_str(w.inv(o.repr)), "repr": _serial_str(o.repr),
                     "size": len(o), "lambda2": sp.lambda2, "lambda2_abs": sp.lambda2_abs,
                     "delta": sp.delta, "mixing": sp.mixing})
    rows.sort(key=lambda r: (r["serial"], r["repr"]))
    return Report({"domain_size": len(w), "n_orbits": len(rows), "generators": w.r}, rows)


def cmd_mint_verify(cfg: dict, seed: int) -> Report:
    from .invariant import closeness_bound_check, mint, verify_approx
    from .statekit import StateVector
    w = _load_invariant(cfg)
    t, trials = int(cfg["t"]), int(cfg["trials"])
    if t < 1 or trials < 1:
        raise ConfigProblem("need t >= 1 and trials >= 1")
    rng = rng_stream(seed, "mint-verify")
    rows, ok = [], True
    for k in range(trials):
        note = mint(w, rng)
        exact = verify_approx(w, note, t)
        sampled = verify_approx(w, note, t, rng)
        pre = w.preimage(note.serial)
        z = rng.normal(size=len(pre)) + 1j * rng.normal(size=len(pre))
        amps = np.zeros(len(w), dtype=complex)
        for x, a in zip(pre, z):
            amps[w.position[x]] = a
        s = StateVector(w.domain, amps / np.linalg.norm(amps))
        lhs, rhs = closeness_bound_check(w, s, t, note.serial)
        good = exact.accept_prob >= 1 - 1e-9 and lhs <= rhs + 1e-9
        ok &= good
        rows.append({"trial": k, "serial": _serial_str(note.serial),
                     "accept_prob": exact.accept_prob, "sampled_accept": sampled.accepted,
                     "closeness_lhs": lhs, "closeness_rhs": rhs, "ok": good})
    acc = float(np.mean([r["sampled_accept"] for r in rows]))
    return Report({"t": t, "trials": trials, "sampled_accept_rate": acc,
                   "min_accept_prob": min(r["accept_prob"] for r in rows)}, rows, ok)


def cmd_oracle_world(cfg: dict, seed: int) -> Report:
    from .invariant import compute_orbits, walk_spectrum
    from .toy_actions import as_walkable, build_oracle_world, postselect_probability
    world = build_oracle_world(int(cfg["n0"]), int(cfg["n1"]), int(cfg["n2"]), int(cfg["p"]),
                               cfg.get("generators"), _or(cfg.get("world_seed"), seed))
    w = as_walkable(world)
    rows = []
    for o in compute_orbits(w):
        sp = walk_spectrum(w, o)
        rows.append({"serial": world.invariant(o.repr), "size": len(o),
                     "lambda2": sp.lambda2, "delta": sp.delta, "mixing": sp.mixing})
    rows.sort(key=lambda r: (r["serial"], r["size"]))
    return Report({"fixture": world.to_json(), "postselect_prob": postselect_probability(world),
                   "n_orbits": len(rows)}, rows)


# ---------------------------------------------------------------------------
# lattice commands
# ---------------------------------------------------------------------------

def cmd_kls_demo(cfg: dict, seed: int) -> Report:
    from .lattice_money import KLSParams, kls_flaw_demo
    kp = KLSParams(int(cfg["P"]), float(cfg["sigma"]), int(cfg["Delta"]), int(cfg["t"]),
                   int(cfg["k"]), int(cfg["d"]))
    rep = kls_flaw_demo(kp, int(cfg["trials"]), rng_stream(seed, "kls-demo"),
                        seed=_or(cfg.get("instance_seed"), seed) % (2 ** 32))
    out = rep.to_json()
    rows = out.pop("trials", []) if isinstance(out.get("trials"), list) else []
    ok = rep.all_decompose and rep.n_independent == 0 and rep.support_pass_rate == 1.0
    return Report(out, rows, ok)


def _suite_instance(cfg: dict, seed: int):
    from .lattice_money import SchemeParams, ball_amplitude, kls_instance, KLSParams, mint, setup
    rng = rng_stream(seed, "lemma-suite")
    if cfg.get("kls"):
        kp = KLSParams(**{k: cfg["kls"][k] for k in cfg["kls"]})
        inst, amp = kls_instance(kp, seed % (2 ** 32))
    else:
        q, m, radius = int(cfg["q"]), int(cfg["m"]), int(cfg["radius"])
        S = np.zeros((m, 1), dtype=np.int64)
        S[0, 0] = S[1, 0] = 1
        inst = setup(SchemeParams(q, 1, m, 1), S, rng)
        amp = ball_amplitude(m, radius)
    _, note = mint(inst, amp, rng)
    return inst, note


def cmd_lemma_suite(cfg: dict, seed: int) -> Report:
    from . import collapse_meas as cm
    which = cfg["which"]
    if which not in ("m1", "m2", "corm", "commute"):
        raise ConfigProblem(f"unknown suite {which!r}")
    inst, note = _suite_instance(cfg, seed)
    rho = note.density()
    noise = cm.NoiseModel(float(cfg["noise_width"]))
    rows, ok = [], True
    for t in cfg["t"]:
        for d in cfg["d"]:
            if which == "commute":
                dev = cm.commute_check(rho, inst, noise, int(t), "M1", cfg["mode"])
                good = dev <= cm.ANALYTIC_TOL
                rows.append({"t": t, "d": d, "deviation": dev, "bound": cm.ANALYTIC_TOL,
                             "pass": good})
                ok &= good
                continue
            fn = {"m1": cm.lemma_m1_suite, "m2": cm.lemma_m2_suite,
                  "corm": cm.corollary_m_suite}[which]
            kw = {"require_mixture": False} if which == "corm" else {}
            r = fn(rho, inst, noise, int(t), int(d), cfg["mode"], **kw)
            rows.append({"t": t, "d": d, "deviation": r.deviation, "bound": r.bound,
                         "pass": r.passed, **{k: v for k, v in r.extra.items()
                                              if not isinstance(v, (list, dict))}})
            ok &= r.passed
    return Report({"which": which, "support": len(note), "q": int(inst.q)}, rows, ok)


def cmd_klwe(cfg: dict, seed: int) -> Report:
    from . import klwe_red as kr
    action = cfg["action"]
    rng = rng_stream(seed, f"klwe-{action}")
    if action == "params":
        hc = kr.HybridConfig(int(cfg["n"]), int(cfg["m"]), int(cfg["q_large"]), int(cfg["q_prime"]),
                             float(cfg["eta"]), float(_or(cfg.get("fN"), 1000.0)))
        rows = kr.hybrid_table_json(kr.hybrid_table(hc))
        sp = kr.mod_switch_params(int(cfg["n"]), int(cfg["m"]), int(cfg["q"]),
                                  int(cfg["q_large"]), float(cfg["sigma"]), float(cfg["eps"]),
                                  float(cfg["B"]))
        return Report({"sigma_prime": sp, "modulus_order_ok": hc.modulus_order_ok,
                       "markdown": kr.hybrid_table_markdown(kr.hybrid_table(hc))},
                      rows, hc.modulus_order_ok)
    k, B, n, m, q = (int(cfg[x]) for x in ("k", "B", "n", "m", "q"))
    sigma = float(cfg["sigma"])
    fN = float(cfg["fN"]) if cfg.get("fN") else float((2 * B) ** k * m * m)
    params = kr.ReductionParams(k, B, fN, sigma)
    dS = kr.bounded_rows(m + k, B)
    if action == "lift":
        if cfg.get("lwe_file"):
            obj = _load_json(cfg["lwe_file"])
            try:
                lwe = kr.LWEChallenge(np.array(obj["A"], dtype=np.int64),
                                      np.array(obj["t"], dtype=np.int64), int(obj["q"]),
                                      obj.get("mode", kr.RANDOM))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigProblem(f"malformed LWE file: {exc}") from exc
            q, m = lwe.q, lwe.m
        else:
            lwe = kr.lwe_challenge(n, m, q, sigma, cfg["mode"], rng)
        rows, ok = [], True
        insts = []
        for trial in range(int(cfg["trials"])):
            for _ in range(100):
                S = np.array([dS(rng) for _ in range(k)], dtype=np.int64).reshape(k, m + k)
                if kr.rank_mod(S, q) == k:
                    break
            inst, rec = kr.lift_lwe_to_klwe(lwe, S, params, rng)
            chk = inst.check()
            good = rec.claim_SU_zero and rec.claim_U_bound and all(chk.values())
            ok &= good
            rows.append({"trial": trial, "max_U": rec.max_U, "bound": params.entry_bound,
                         "SU_zero": rec.claim_SU_zero, "smudge": rec.smudge,
                         "effective_k": inst.k, "ok": good})
            insts.append(inst)
        export = cfg.get("export", "challenge")
        return Report({"instance": insts[-1].to_json(export) if insts else None}, rows, ok)
    if action == "audit":
        genA = kr.lifted_generator(n, m, q, sigma, params, dS, cfg["mode"])
        genB = kr.direct_generator(n, m, q, sigma, params, dS, cfg["mode"])
        rep = kr.distribution_audit(genA, genB, None, int(cfg["trials"]), rng)
        out = rep.to_json()
        rows = [{"statistic": name, "p": p} for name, p in sorted(out.pop("pvalues").items())]
        return Report(out, rows, rep.passed)
    raise ConfigProblem(f"unknown klwe action {action!r}")


def cmd_gaussian(cfg: dict, seed: int) -> Report:
    from . import gaussian as g
    from scipy import stats
    bench = cfg["bench"]
    rng = rng_stream(seed, f"gaussian-{bench}")
    tol = 1e-8
    if bench == "1d":
        gz = g.Gaussian1D(float(cfg["c"]), float(cfg["sigma"]), float(cfg["tau"]))
        res = g.coherent_gaussian_Z(gz)
        labels = [(int(x),) for x in res.state.basis]
        ref = g.closed_form_amplitudes(labels, [gz.c], np.array([[1.0 / gz.sigma ** 2]]))
        err = float(np.max(np.abs(np.abs(res.state.amps) - ref)))
        rows = [{"x": lab[0], "prob": float(abs(a) ** 2)} for lab, a in zip(labels, res.state.amps)]
        return Report({"accept_prob": res.accept_prob, "max_amp_error": err}, rows, err <= tol)
    if bench == "lattice":
        B = np.array(cfg["basis"], dtype=float)
        c = np.array(cfg["center"], dtype=float)
        sigma = float(cfg["sigma"])
        st, audit = g.coherent_gaussian_lattice(B, c, sigma, float(cfg["tau"]), audit=True)
        ref = g.closed_form_amplitudes(st.basis, c, np.eye(len(c)) / sigma ** 2)
        err = float(np.max(np.abs(np.abs(st.amps) - ref)))
        samples = g.classical_gpv_samples(B, c, sigma, rng, int(cfg["samples"]), float(cfg["tau"]))
        index = {lab: i for i, lab in enumerate(st.basis)}
        counts = np.zeros(len(st.basis))
        for s in map(tuple, samples.tolist()):
            counts[index[s]] += 1
        probs = np.abs(st.amps) ** 2
        keep = probs * len(samples) >= 5
        obs = np.append(counts[keep], counts[~keep].sum())
        exp = np.append(probs[keep], probs[~keep].sum()) * len(samples)
        obs, exp = obs[exp > 0], exp[exp > 0]
        p = float(stats.chisquare(obs, exp * obs.sum() / exp.sum())[1])
        rows = [{"label": list(lab), "prob": float(pr), "count": int(cn)}
                for lab, pr, cn in zip(st.basis, probs, counts)]
        ok = err <= tol and audit.trace_distance <= 1e-9 and p >= 0.01
        return Report({"points": len(st.basis), "max_amp_error": err,
                       "trace_distance": audit.trace_distance, "chi2_p": p}, rows, ok)
    if bench == "cov":
        B = np.array(cfg["basis"], dtype=float)
        spec = g.CovarianceSpec.make(np.array(cfg["Sigma"], dtype=float), cfg["center"])
        st = g.coherent_gaussian_cov(B, spec, float(cfg["tau"]))
        ref = g.closed_form_amplitudes(st.basis, spec.c, spec.Sigma_inv)
        err = float(np.max(np.abs(np.abs(st.amps) - ref)))
        rows = [{"label": list(lab), "prob": float(abs(a) ** 2)} for lab, a in zip(st.basis, st.amps)]
        return Report({"points": len(st.basis), "max_amp_error": err}, rows, err <= tol)
    raise ConfigProblem(f"unknown gaussian bench {bench!r}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

@dataclass
class Command:
    func: Callable[[dict, int], Report]
    defaults: dict
    flags: dict        # flag name -> (type, help)
    positional: str | None = None
    choices: tuple = ()


_TRIPLE = {"t": [2, 4], "d": [2, 3]}

COMMANDS: dict[str, Command] = {
    "orbits": Command(cmd_orbits, {"descriptor": None, "builtin": "cycle:6"},
                      {"descriptor": (str, "walkable-invariant JSON descriptor"),
                       "builtin": (str, "cycle:N | hypercube:BITS | product:N:CLASSES")}),
    "mint-verify": Command(cmd_mint_verify, {"descriptor": None, "builtin": "cycle:6",
                                             "t": 20, "trials": 5},
                           {"descriptor": (str, "walkable-invariant JSON descriptor"),
                            "builtin": (str, "built-in invariant"),
                            "t": (int, "verifier rounds"), "trials": (int, "number of notes")}),
    "oracle-world": Command(cmd_oracle_world, {"n0": 5, "n1": 1, "n2": 2, "p": 7,
                                               "generators": None, "world_seed": None},
                            {"n0": (int, "encoding bits"), "n1": (int, "hidden-string bits"),
                             "n2": (int, "serial bits"), "p": (int, "group order (prime)"),
                             "world_seed": (int, "seed of the oracle tables")}),
    "kls-demo": Command(cmd_kls_demo, {"P": 4099, "sigma": 2.0, "Delta": 5, "t": 3, "k": 30,
                                       "d": 3, "trials": 5, "instance_seed": None},
                        {"P": (int, "modulus"), "sigma": (float, "Gaussian width"),
                         "Delta": (int, "Delta"), "t": (int, "t"), "k": (int, "k"),
                         "d": (int, "dimension"), "trials": (int, "clone pairs"),
                         "instance_seed": (int, "seed of the instance")}),
    "lemma-suite": Command(cmd_lemma_suite, {"which": "m1", "q": 257, "m": 6, "radius": 3,
                                             "noise_width": 0.5, "mode": "analytic",
                                             "t": _TRIPLE["t"], "d": _TRIPLE["d"], "kls": None},
                           {"mode": (str, "analytic | exact"),
                            "noise_width": (float, "noise width"),
                            "q": (int, "modulus (prime)"), "m": (int, "dimension"),
                            "radius": (int, "ball radius of the note")},
                           positional="which", choices=("m1", "m2", "corm", "commute")),
    "klwe": Command(cmd_klwe, {"action": "params", "k": 2, "B": 1, "n": 2, "m": 10, "q": 13,
                               "sigma": 1.0, "fN": None, "mode": "Real", "trials": 50,
                               "lwe_file": None, "export": "challenge",
                               "q_prime": 97, "q_large": 2147483647, "eta": 10.0, "eps": 0.25},
                    {"k": (int, "number of short vectors"), "B": (int, "entry bound"),
                     "n": (int, "LWE dimension"), "m": (int, "LWE samples"),
                     "q": (int, "modulus"), "sigma": (float, "noise width"),
                     "fN": (float, "noise blow-up"), "mode": (str, "Real | Random"),
                     "trials": (int, "trials"), "lwe_file": (str, "LWE pair JSON {A, t, q}"),
                     "export": (str, "challenge | test")},
                    positional="action", choices=("lift", "audit", "params")),
    "gaussian": Command(cmd_gaussian, {"bench": "1d", "c": 0.0, "sigma": 4.0, "tau": 8.0,
                                       "basis": [[1, 0], [0, 1]], "center": [0.0, 0.0],
                                       "Sigma": [[16.0, 0.0], [0.0, 16.0]], "samples": 20000},
                        {"c": (float, "1-D centre"), "sigma": (float, "width"),
                         "tau": (float, "truncation"), "samples": (int, "classical samples")},
                        positional="bench", choices=("1d", "lattice", "cov")),
}


def build_parser() -> argparse.ArgumentParser:
    def common(p, default):
        # accepted before or after the subcommand name
        kw = {} if default else {"default": argparse.SUPPRESS}
        p.add_argument("--seed", type=int, **({"default": 0} if default else kw))
        p.add_argument("--config", help="JSON file of command parameters",
                       **({"default": None} if default else kw))
        p.add_argument("--out", help="write the report here instead of stdout",
                       **({"default": None} if default else kw))
        p.add_argument("--format", choices=("json", "csv", "md"),
                       **({"default": "json"} if default else kw))

    ap = argparse.ArgumentParser(prog="qmoney", description=__doc__.splitlines()[0])
    common(ap, True)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, cmd in COMMANDS.items():
        sp = sub.add_parser(name)
        common(sp, False)
        if cmd.positional:
            sp.add_argument(cmd.positional, nargs="?", default=None, choices=cmd.choices)
        for flag, (typ, hlp) in cmd.flags.items():
            sp.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=typ, default=None,
                            help=hlp)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    cmd = COMMANDS[args.command]
    overrides = {k: getattr(args, k) for k in cmd.flags}
    if cmd.positional:
        overrides[cmd.positional] = getattr(args, cmd.positional)
    try:
        cfg = resolve_config(cmd.defaults, args.config, overrides)
        rep = cmd.func(cfg, args.seed)
        text = render(args.command, cfg, args.seed, rep, args.format)
    except ConfigProblem as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QMoneyError, KeyError, TypeError) as exc:
        print(f"invalid parameters: {exc!r}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_SUITE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
