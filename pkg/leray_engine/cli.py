"""
CLI - пакетный интерфейс движка

Команды:
- cohomology SPACE [--sheaf S]             - H^i(X, F)
- pages COMPLEX FILTRATION [--dec]         - страницы E_r и абатмент
- couple COMPLEX FILTRATION [--verify]     - страницы производных точных пар
- verify-dec [COMPLEX FILTRATION] [--random N --seed S]
- leray MAP FILTRATION [--sheaf S] [--pairs CELLS] [--verify]

Общие флаги: --coefficients {z,q}, --format {table,records}, --r-max N.
Коды выхода: 0 - успех/PASS, 1 - проверка FAIL, 2 - ошибка входа.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Type, TypeVar

from pydantic import BaseModel, ValidationError, field_validator

from .cell_site import cohomology
from .config import EngineSettings, get_settings
from .documents import build_cell_complex, build_filtered, build_filtered_space, build_map, build_sheaf
from .exact_algebra import CoefficientMode, EngineError, FgAbGroup
from .exact_couple import couple_from_filtration, couple_pages, verify_couple_against_filtration
from .filtered_complex import SpectralSequence, abutment, dec, random_filtered_complex, verify_dec_shift
from .leray import compare_leray, pair_leray
from .schemas import (
    BigradedTable,
    CellComplexDocument,
    CohomologyRow,
    ComplexDocument,
    FiltrationDocument,
    MapDocument,
    PageRecord,
    ReportEnvelope,
    SheafDocument,
    VerificationReport,
)
from .verification import VerificationRunner

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INPUT = 2

COMMANDS = ("cohomology", "pages", "leray", "couple", "verify-dec")

Doc = TypeVar("Doc", bound=BaseModel)


class InputError(EngineError):
    """Файл не найден, не разбирается как JSON или не проходит схему"""
    pass


# ==================== Manifest ====================

class Manifest(BaseModel):
    """Разобранные аргументы команды вместе с настройками"""
    command: str
    inputs: Dict[str, Path] = {}
    coefficients: CoefficientMode = CoefficientMode.INTEGERS
    output_format: str = "table"
    r_max: int = 0
    seed: int = 0
    random: int = 0
    pairs: Optional[List[str]] = None
    verify: bool = False
    dec: bool = False

    @field_validator("command")
    @classmethod
    def _known_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command '{value}'")
        return value

    @field_validator("inputs")
    @classmethod
    def _files_exist(cls, value: Dict[str, Path]) -> Dict[str, Path]:
        for role, path in value.items():
            if not path.is_file():
                raise ValueError(f"{role} file '{path}' does not exist")
        return value

    @field_validator("output_format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in ("table", "records"):
            raise ValueError("format must be 'table' or 'records'")
        return value


def resolve_path(raw: str, settings: EngineSettings) -> Path:
    """Сначала относительно рабочего каталога, затем fixtures_dir"""
    path = Path(raw)
    if path.is_file() or path.is_absolute() or settings.fixtures_dir is None:
        return path
    candidate = settings.fixtures_dir / path
    return candidate if candidate.is_file() else path


def build_manifest(args: argparse.Namespace, settings: EngineSettings) -> Manifest:
    roles = ("space", "sheaf", "complex", "filtration", "map")
    inputs = {
        role: resolve_path(getattr(args, role), settings)
        for role in roles
        if getattr(args, role, None)
    }
    pairs = None
    if getattr(args, "pairs", None) is not None:
        pairs = [c.strip() for c in args.pairs.split(",") if c.strip()]
    try:
        return Manifest(
            command=args.command,
            inputs=inputs,
            coefficients=args.coefficients or settings.coefficients,
            output_format=args.format or settings.output_format,
            r_max=args.r_max if args.r_max is not None else settings.r_max,
            seed=args.seed if getattr(args, "seed", None) is not None else settings.seed,
            random=getattr(args, "random", 0) or 0,
            pairs=pairs,
            verify=getattr(args, "verify", False),
            dec=getattr(args, "dec", False),
        )
    except ValidationError as e:
        raise InputError("Invalid command line", errors=_validation_errors(e)) from e


# ==================== Documents ====================

def _validation_errors(e: ValidationError) -> List[Dict[str, str]]:
    return [{"field": ".".join(str(x) for x in err["loc"]), "message": err["msg"]} for err in e.errors()]


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except UnicodeDecodeError as e:
        raise InputError(
            f"{path}: not valid UTF-8 at byte {e.start}",
            file=str(path), offset=e.start, reason=e.reason,
        ) from e
    except OSError as e:
        raise InputError(f"{path}: {e.strerror or e}", file=str(path), errno=e.errno) from e
    except json.JSONDecodeError as e:
        raise InputError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}",
            file=str(path), line=e.lineno, column=e.colno,
        ) from e


def read_document(path: Path, model: Type[Doc]) -> Doc:
    data = _read_json(path)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise InputError(f"{path}: does not match the {model.__name__} schema",
                         file=str(path), errors=_validation_errors(e)) from e


def read_complex_document(path: Path):
    """Явный комплекс (есть 'dims') или клеточный комплекс"""
    data = _read_json(path)
    model = ComplexDocument if isinstance(data, dict) and "dims" in data else CellComplexDocument
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise InputError(f"{path}: does not match the {model.__name__} schema",
                         file=str(path), errors=_validation_errors(e)) from e


def _optional_sheaf(manifest: Manifest) -> Optional[SheafDocument]:
    path = manifest.inputs.get("sheaf")
    return read_document(path, SheafDocument) if path else None


def _require(manifest: Manifest, *roles: str) -> None:
    missing = [r for r in roles if r not in manifest.inputs]
    if missing:
        raise InputError(f"Command '{manifest.command}' needs {', '.join(missing)} file(s)", missing=missing)


def _load_filtered(manifest: Manifest):
    _require(manifest, "complex", "filtration")
    return build_filtered(
        read_complex_document(manifest.inputs["complex"]),
        read_document(manifest.inputs["filtration"], FiltrationDocument),
        _optional_sheaf(manifest),
    )


# ==================== Commands ====================

def cmd_cohomology(manifest: Manifest) -> ReportEnvelope:
    _require(manifest, "space")
    X = build_cell_complex(read_document(manifest.inputs["space"], CellComplexDocument))
    F = build_sheaf(_optional_sheaf(manifest), X)
    rows = [
        CohomologyRow(degree=n, group=g.over(manifest.coefficients))
        for n, g in sorted(cohomology(X, F).items())
    ]
    return ReportEnvelope(command="cohomology", coefficients=manifest.coefficients, cohomology=rows)


def cmd_pages(manifest: Manifest) -> ReportEnvelope:
    K, F = _load_filtered(manifest)
    if manifest.dec:
        F = dec(F, K)
    ss = SpectralSequence(K, F)
    mode = manifest.coefficients
    pages = [PageRecord(r=pg.r, table=pg.table(mode)) for pg in ss.pages(manifest.r_max or None)]
    ab = abutment(K, F, spectral=ss)
    report = VerificationReport(name="abutment", filtration=ab.filtration_rows(mode))
    return ReportEnvelope(
        command="pages", coefficients=mode, cohomology=ab.rows(mode), pages=pages, reports=[report],
    )


def cmd_couple(manifest: Manifest) -> ReportEnvelope:
    K, F = _load_filtered(manifest)
    mode = manifest.coefficients
    r_stab = SpectralSequence(K, F).r_stab
    r_max = manifest.r_max or r_stab
    couple = couple_from_filtration(K, F, depth=max(r_max, r_stab))
    pages = [PageRecord(r=pg.r, table=pg.table(mode)) for pg in couple_pages(couple, r_max)]
    envelope = ReportEnvelope(command="couple", coefficients=mode, pages=pages)
    if manifest.verify:
        report = verify_couple_against_filtration(K, F, r_max)
        envelope.reports.append(report)
        envelope.status = "PASS" if report.passed else "FAIL"
    return envelope


def _dec_check(seed: int) -> VerificationReport:
    fc = random_filtered_complex(seed)
    report = verify_dec_shift(fc.complex, fc.filtration)
    report.name = f"dec shift #{seed}"
    return report


def cmd_verify_dec(manifest: Manifest) -> ReportEnvelope:
    reports: List[VerificationReport] = []
    if "complex" in manifest.inputs or "filtration" in manifest.inputs:
        K, F = _load_filtered(manifest)
        reports.append(verify_dec_shift(K, F, manifest.r_max))
    if manifest.random:
        jobs = [
            (f"dec shift #{s}", lambda s=s: _dec_check(s))
            for s in range(manifest.seed, manifest.seed + manifest.random)
        ]
        reports.extend(VerificationRunner().run_sync(jobs))
    if not reports:
        raise InputError("verify-dec needs COMPLEX and FILTRATION files or --random N")
    passed = all(r.passed for r in reports)
    return ReportEnvelope(
        command="verify-dec", coefficients=manifest.coefficients,
        status="PASS" if passed else "FAIL", reports=reports,
    )


def cmd_leray(manifest: Manifest) -> ReportEnvelope:
    _require(manifest, "map", "filtration")
    f = build_map(read_document(manifest.inputs["map"], MapDocument))
    F = build_sheaf(_optional_sheaf(manifest), f.X)
    Y_filt = build_filtered_space(read_document(manifest.inputs["filtration"], FiltrationDocument), f.Y)
    mode = manifest.coefficients
    if manifest.pairs is not None:
        report = pair_leray(f, manifest.pairs, Y_filt, F, mode=mode)
    else:
        report = compare_leray(f, F, Y_filt, r_max=manifest.r_max, mode=mode)
    envelope = ReportEnvelope(command="leray", coefficients=mode, cohomology=report.cohomology, reports=[report])
    if manifest.verify:
        envelope.status = "PASS" if report.passed else "FAIL"
    return envelope


HANDLERS = {
    "cohomology": cmd_cohomology,
    "pages": cmd_pages,
    "couple": cmd_couple,
    "verify-dec": cmd_verify_dec,
    "leray": cmd_leray,
}


# ==================== Output ====================

def format_group(g: FgAbGroup, mode: CoefficientMode) -> str:
    text = str(g)
    return text.replace("Z", "Q") if mode == CoefficientMode.RATIONALS else text


def _format_table(title: str, table: BigradedTable, mode: CoefficientMode) -> List[str]:
    lines = [f"== {title} =="]
    if not table.entries:
        lines.append("  (all entries zero)")
    for e in table.entries:
        lines.append(f"  ({e.p}, {e.q})  {format_group(e.group, mode)}")
    for d in table.differentials:
        lines.append(
            f"  d ({d.p}, {d.q}): image {format_group(d.image, mode)}, "
            f"kernel {format_group(d.kernel, mode)}, cokernel {format_group(d.cokernel, mode)}"
        )
    return lines


def render_table(envelope: ReportEnvelope) -> str:
    mode = envelope.coefficients
    lines = [f"# {envelope.command} (coefficients {mode.value}): {envelope.status}"]
    if envelope.cohomology:
        lines.append("== cohomology ==")
        lines.extend(f"  H^{row.degree} = {format_group(row.group, mode)}" for row in envelope.cohomology)
    for record in envelope.pages:
        lines.extend(_format_table(f"E_{record.r}", record.table, mode))
    for report in envelope.reports:
        verdict = "PASS" if report.passed else "FAIL"
        lines.append(f"== {report.name}: {verdict} ({report.checks} checks) ==")
        for name, table in sorted(report.tables.items()):
            lines.extend(_format_table(name, table, mode))
        for row in report.filtration:
            lines.append(
                f"  L^{row.p} H^{row.n} = {format_group(row.level, mode)}, "
                f"Gr = {format_group(row.graded, mode)}"
            )
        for m in report.mismatches:
            where = ", ".join(f"{k}={v}" for k, v in m.location.items())
            lines.append(f"  mismatch [{m.check}] at {where}: expected {m.expected}, got {m.actual}")
        lines.extend(f"  note: {note}" for note in report.notes)
    return "\n".join(lines)


def render(envelope: ReportEnvelope, output_format: str) -> str:
    if output_format == "records":
        return envelope.model_dump_json(indent=2)
    return render_table(envelope)


# ==================== Entry point ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leray-engine", description="Exact spectral sequences and Leray verification")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--coefficients", choices=[m.value for m in CoefficientMode], default=None)
    common.add_argument("--format", choices=("table", "records"), default=None)
    common.add_argument("--r-max", dest="r_max", type=int, default=None, help="last page (0 = until stable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cohomology", parents=[common], help="H^i of a cellular sheaf")
    p.add_argument("space")
    p.add_argument("--sheaf", default=None)

    p = sub.add_parser("pages", parents=[common], help="pages of a filtered complex")
    p.add_argument("complex")
    p.add_argument("filtration")
    p.add_argument("--sheaf", default=None)
    p.add_argument("--dec", action="store_true", help="use the shifted filtration Dec F")

    p = sub.add_parser("couple", parents=[common], help="pages of the derived exact couples")
    p.add_argument("complex")
    p.add_argument("filtration")
    p.add_argument("--sheaf", default=None)
    p.add_argument("--verify", action="store_true", help="compare with the filtration pages")

    p = sub.add_parser("verify-dec", parents=[common], help="check E_r(Dec F) against E_{r+1}(F)")
    p.add_argument("complex", nargs="?", default=None)
    p.add_argument("filtration", nargs="?", default=None)
    p.add_argument("--sheaf", default=None)
    p.add_argument("--random", type=int, default=0, help="number of seeded random filtered complexes")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("leray", parents=[common], help="Leray spectral sequence of a cellular map")
    p.add_argument("map")
    p.add_argument("filtration", help="cell levels of a filtration of the target")
    p.add_argument("--sheaf", default=None, help="sheaf on the source (default: constant Z)")
    p.add_argument("--pairs", default=None, help="comma separated closed cell set of the target")
    p.add_argument("--verify", action="store_true", help="exit 1 on any mismatch")
    return parser


def _emit_error(e: Exception) -> None:
    payload = {"error": type(e).__name__, "message": str(e)}
    if isinstance(e, EngineError):
        payload["details"] = e.details
    print(json.dumps(payload, default=str), file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        manifest = build_manifest(args, settings)
        envelope = HANDLERS[manifest.command](manifest)
    except EngineError as e:
        logger.error(f"❌ {args.command}: {e}")
        _emit_error(e)
        return EXIT_INPUT
    print(render(envelope, manifest.output_format))
    if envelope.status == "FAIL":
        return EXIT_FAIL
    return EXIT_OK
