from __future__ import annotations

import argparse
import json
import logging
import math
import sqlite3
import sys
import time
from dataclasses import asdict
from datetime import datetime
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ncrough.config import NUMERICS, STUDY_NAMES, RunConfig, load_config, parse_overrides
from ncrough.db.db import connect, init_schema
from ncrough.db.repos.run_repo import RunRepository
from ncrough.domain.errors import AcceptanceError, NcRoughError, UsageError
from ncrough.domain.functional import FunctionSpec, functions_from_json
from ncrough.domain.matrix_model import (
    AlgebraElement,
    GridPath,
    Space,
    dyadic_grid,
    random_hermitian,
    simulate_free_bm,
    substream,
)
from ncrough.domain.pairings import MAX_DENSITY_ORDER, MomentQuery, density_moment, q_gaussian_moment, q_joint_moment
from ncrough.domain.path_io import load_element, load_path, save_path
from ncrough.domain.rough import AreaKind, ControlledBiprocess, LevyArea, rough_integral
from ncrough.domain.sde import PICARD, paired_functions, solve_rough_sde, solve_trace_sde
from ncrough.experiments import studies
from ncrough.experiments.interpolation import dyadic_partition
from ncrough.experiments.tables import StudyTable, write_manifest
from ncrough.pdf.render_report import render_report_pdf
from ncrough.utils.logging import setup_logging
from ncrough.utils.parallel import thread_count
from ncrough.utils.paths import registry_path, runs_dir

logger = logging.getLogger("ncrough.main")

_INITIAL_STREAM = 11


# =========================
# Parseur
# =========================
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", type=Path, help="fichier JSON de paramètres")
    common.add_argument("--seed", type=int, help="graine maîtresse (défaut 42)")
    common.add_argument("--output-dir", type=Path, help="dossier de sortie (défaut : data/runs/...)")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ...")

    parser = argparse.ArgumentParser(
        prog="ncrough",
        description="Chemins rugueux non commutatifs : moments, simulation, intégration, EDS, études.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("moments", parents=[common], allow_abbrev=False, help="moments q-gaussiens")
    sub.add_parser("simulate", parents=[common], allow_abbrev=False, help="simule un mouvement brownien libre")
    sub.add_parser("integrate", parents=[common], allow_abbrev=False, help="intégrale rugueuse de ∂f(X)♯dX")
    sub.add_parser("solve", parents=[common], allow_abbrev=False, help="résout une EDS rugueuse")
    p_study = sub.add_parser("study", parents=[common], allow_abbrev=False, help="lance une étude")
    p_study.add_argument("name", choices=STUDY_NAMES)

    p_report = sub.add_parser("report", allow_abbrev=False, help="rapport PDF d'une table CSV")
    p_report.add_argument("csv", type=Path)
    p_report.add_argument("--out", type=Path)
    p_report.add_argument("--log-level")

    p_runs = sub.add_parser("runs", allow_abbrev=False, help="liste les exécutions enregistrées")
    p_runs.add_argument("--limit", type=int, default=20)
    p_runs.add_argument("--filter", dest="filter_command")
    which = p_runs.add_mutually_exclusive_group()
    which.add_argument("--show", type=int, metavar="ID", help="affiche une exécution et sa configuration")
    which.add_argument("--delete", type=int, metavar="ID", help="retire une exécution du registre")
    p_runs.add_argument("--log-level")
    return parser


# =========================
# Outils
# =========================
def _path_for(cfg: RunConfig) -> GridPath:
    p = cfg.params
    if p.get("path_file"):
        return load_path(Path(p["path_file"]))
    grid = dyadic_grid(p["horizon"], 2 ** p["fine_exp"])
    return simulate_free_bm(Space(p["dimension"]), grid, cfg.seed)


def _area(kind: str, path: GridPath) -> LevyArea:
    return LevyArea(path, AreaKind(kind))


def _element_rows(table: StudyTable, path: GridPath) -> None:
    for k in range(path.grid.size):
        x = path.value(k)
        table.add(
            t=float(path.grid[k]),
            norm=x.norm(),
            trace_re=float(x.trace().real),
            trace_im=float(x.trace().imag),
            self_adjoint_defect=x.self_adjoint_defect(),
        )


# =========================
# Commandes
# =========================
def cmd_moments(cfg: RunConfig, out_dir: Path) -> tuple[StudyTable, list[Path]]:
    p = cfg.params
    q = p["q"]
    if p["times"] is not None:
        table = StudyTable("moments", ("q", "times", "pairing"))
        value = q_joint_moment(MomentQuery(q=q, times=tuple(p["times"])))
        table.add(q=q, times=" ".join(str(t) for t in p["times"]), pairing=float(value))
        print(f"φ(X_t1...X_tr) = {float(value):.17g}")
        return table, []

    order = p["order"]
    table = StudyTable("moments", ("q", "order", "pairing", "density", "difference"))
    pairing = float(q_gaussian_moment(order, q))
    if p["density"] and order <= MAX_DENSITY_ORDER:
        density = density_moment(q, order)
    else:
        if p["density"]:
            logger.warning("ordre %s > %s : moment de densité non calculé", order, MAX_DENSITY_ORDER)
        density = math.nan
    table.add(q=q, order=order, pairing=pairing, density=density, difference=abs(pairing - density))
    print(f"appariements = {pairing:.17g}   densité = {density:.17g}")
    return table, []


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> tuple[StudyTable, list[Path]]:
    p = cfg.params
    path = simulate_free_bm(
        Space(p["dimension"]), dyadic_grid(p["horizon"], 2 ** p["fine_exp"]), cfg.seed, path_id=p["path_id"]
    )
    binary = save_path(path, out_dir / "path.ncrp")
    table = StudyTable("simulate", ("t", "norm", "trace_re", "trace_im", "self_adjoint_defect"))
    _element_rows(table, path)
    return table, [binary]


def cmd_integrate(cfg: RunConfig, out_dir: Path) -> tuple[StudyTable, list[Path]]:
    p = cfg.params
    path = _path_for(cfg)
    f = FunctionSpec.from_json(p["f"])
    coarse = dyadic_partition(path.steps, 2 ** p["coarse_exp"])
    result = rough_integral(ControlledBiprocess.derivative_of(f, path), _area(p["area"], path), coarse, tol=p["tol"])
    table = StudyTable("integrate", ("s", "t", "norm", "trace_re", "trace_im"))
    for s, t, norm, re, im in result.values.rows():
        table.add(s=s, t=t, norm=norm, trace_re=re, trace_im=im)
    table.summary.update(gap=result.gap, converged=result.converged)
    return table, []


def _initial(cfg: RunConfig, space: Space) -> AlgebraElement:
    p = cfg.params
    if p["initial_file"]:
        a = load_element(Path(p["initial_file"]))
        if a.dimension != space.dimension:
            raise UsageError(f"Matrice initiale de dimension {a.dimension}, chemin de dimension {space.dimension}.")
        return space.element(a.entries)
    if p["initial"] == "zero":
        return space.zero()
    if p["initial"] == "identity":
        return space.identity() * p["initial_scale"]
    return random_hermitian(space, substream(cfg.seed, _INITIAL_STREAM), p["initial_scale"])


def cmd_solve(cfg: RunConfig, out_dir: Path) -> tuple[StudyTable, list[Path]]:
    p = cfg.params
    path = _path_for(cfg)
    fs = functions_from_json(p["f"])
    gs = functions_from_json(p["g"]) if p["pairing"] == "explicit" else paired_functions(fs, p["pairing"])
    area = _area(p["area"], path)
    coarse = dyadic_partition(path.steps, 2 ** p["coarse_exp"])
    a = _initial(cfg, path.space)
    if p["trace"]:
        if len(fs) != 1:
            raise UsageError("Le mode trace prend une seule fonction f.")
        solution = solve_trace_sde(a, fs[0], area, coarse)
    else:
        result = solve_rough_sde(
            a,
            fs,
            gs,
            area,
            coarse,
            scheme=p["scheme"],
            iterations=p["iterations"],
            picard_tol=p["picard_tol"],
            self_adjoint=p["self_adjoint"],
        )
        solution = result.process.path
        if p["scheme"] == PICARD:
            logger.info("Picard : %s itérations, écart %.3g", result.iterations, result.gap)
    binary = save_path(solution, out_dir / "solution.ncrp")
    table = StudyTable("solve", ("t", "norm", "trace_re", "trace_im", "self_adjoint_defect"))
    _element_rows(table, solution)
    return table, [binary]


def _study_kwargs(cfg: RunConfig) -> dict[str, Any]:
    kwargs = dict(cfg.params)
    name = cfg.study
    if "n_seeds" in kwargs:
        kwargs.pop("n_seeds")
        kwargs["seeds"] = cfg.seeds()
        kwargs["threads"] = thread_count()
    else:
        kwargs["seed"] = cfg.seed
    if name == "solution-convergence":
        kwargs["fs"] = functions_from_json(kwargs.pop("f"))
        kwargs["gs"] = functions_from_json(kwargs.pop("g"))
    if name == "ito-formula" and kwargs.get("functions") is not None:
        kwargs["functions"] = [(item["label"], FunctionSpec.from_json(item["f"])) for item in kwargs["functions"]]
    if name == "ito-strato" and kwargs.get("pairs") is not None:
        kwargs["pairs"] = [
            (item["label"], functions_from_json(item["f"]), functions_from_json(item["g"])) for item in kwargs["pairs"]
        ]
    return kwargs


def cmd_study(cfg: RunConfig, out_dir: Path) -> tuple[StudyTable, list[Path]]:
    fn = studies.STUDIES[cfg.study]
    logger.info("étude %s (graine %s)", cfg.study, cfg.seed)
    return fn(**_study_kwargs(cfg)), []


COMMANDS = {
    "moments": cmd_moments,
    "simulate": cmd_simulate,
    "integrate": cmd_integrate,
    "solve": cmd_solve,
}


# =========================
# Exécution
# =========================
def _output_dir(cfg: RunConfig) -> Path:
    if cfg.output_dir is not None:
        return Path(cfg.output_dir)
    stamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    base = runs_dir() / f"{cfg.command.replace(':', '_')}_{stamp}_s{cfg.seed}"
    out, k = base, 1
    # ne jamais écraser une exécution précédente
    while out.exists():
        out = base.with_name(f"{base.name}_{k}")
        k += 1
    return out


def _open_registry() -> RunRepository | None:
    try:
        conn = connect(registry_path())
        init_schema(conn)
    except (sqlite3.Error, OSError) as e:
        logger.warning("registre indisponible : %s", e)
        return None
    return RunRepository(conn)


def run(cfg: RunConfig, log_level: str | None = None) -> int:
    """Exécute une configuration validée : CSV + manifeste + enregistrement du run."""
    out_dir = _output_dir(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    setup_logging(log_level, log_file=out_dir / "run.log")
    (out_dir / "config.json").write_text(cfg.dumps(), encoding="utf-8")

    repo = _open_registry()
    run_id = repo.start(command=cfg.command, seed=cfg.seed, config=cfg.to_json(), output_dir=str(out_dir)) if repo else None

    started_at = datetime.now()
    t0 = time.perf_counter()
    outputs: list[Path] = []
    csv_path = ""
    code, message = 0, ""
    try:
        if cfg.study is not None:
            table, extra = cmd_study(cfg, out_dir)
        else:
            table, extra = COMMANDS[cfg.command](cfg, out_dir)
        csv = table.write_csv(out_dir / f"{table.name}.csv")
        csv_path = str(csv)
        outputs = [csv, *extra]
        table.check()
    except Exception as e:
        code, message = getattr(e, "exit_code", 1), str(e)
        raise
    finally:
        write_manifest(
            out_dir,
            command=cfg.command,
            config={**cfg.to_json(), "numerics": NUMERICS},
            seed=cfg.seed,
            started_at=started_at,
            duration_s=time.perf_counter() - t0,
            outputs=outputs,
            status="ok" if code == 0 else "failed",
        )
        if repo is not None and run_id is not None:
            repo.finish(run_id, exit_code=code, csv_path=csv_path, message=message)
            repo.conn.close()
    print(f"Sorties : {out_dir}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    out = args.out or Path(args.csv).with_suffix(".pdf")
    result = render_report_pdf(csv_path=args.csv, out_path=out)
    print(f"PDF : {result.pdf_path} ({result.pages} page(s))")
    return 0


def cmd_runs(args: argparse.Namespace) -> int:
    repo = _open_registry()
    if repo is None:
        return 1
    try:
        run_id = args.show if args.show is not None else args.delete
        if run_id is not None:
            item = repo.get_by_id(run_id)
            if item is None:
                raise UsageError(f"Exécution {run_id} introuvable.")
            if args.delete is not None:
                repo.delete(run_id)
                print(f"Exécution {run_id} supprimée du registre.")
            else:
                print(json.dumps(asdict(item), ensure_ascii=False, indent=2))
            return 0
        for item in repo.list_recent(args.limit, args.filter_command):
            code = "" if item.exit_code is None else item.exit_code
            print(f"{item.id:>5}  {item.started_at}  {item.command:<28} seed={item.seed:<6} {item.status:<8} {code!s:>2}  {item.csv_path}")
    finally:
        repo.conn.close()
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        setup_logging(args.log_level)
        if args.command == "report":
            _reject_extra(parser, extra)
            return cmd_report(args)
        if args.command == "runs":
            _reject_extra(parser, extra)
            return cmd_runs(args)

        command = f"study:{args.name}" if args.command == "study" else args.command
        cfg = load_config(
            command,
            config_file=args.config,
            overrides=parse_overrides(extra),
            seed=args.seed,
            output_dir=args.output_dir,
        )
        return run(cfg, args.log_level)
    except AcceptanceError as e:
        print(f"ÉCHEC : {e}", file=sys.stderr)
        if e.row is not None:
            print(json.dumps(e.row, default=_json_default, ensure_ascii=False), file=sys.stderr)
        return e.exit_code
    except NcRoughError as e:
        print(f"Erreur : {e}", file=sys.stderr)
        return e.exit_code


def _reject_extra(parser: argparse.ArgumentParser, extra: Sequence[str]) -> None:
    if extra:
        parser.error(f"arguments inattendus : {' '.join(extra)}")


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return str(value)


if __name__ == "__main__":
    raise SystemExit(main())
