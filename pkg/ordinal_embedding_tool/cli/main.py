#!/usr/bin/env python3
"""
Interfaz CLI para Ordinal Embedding Tool
Muestreo de nubes, diseños de comparaciones, embeddings y experimentos de tasas
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ..config.experiment import load_experiment_config
from ..config.settings import settings
from ..core.designs import DESIGN_KINDS, BUILTIN_TRANSFORMS, DissimilarityOracle, build_design
from ..core.embedders import (
    RefineSchedule,
    exact_rejection_embed,
    landmark_embed,
    refine_embed,
    verify_embedding,
)
from ..core.experiments import LEMMA_CHECKS, run_lemma_suite, run_rate_experiment
from ..core.geometry import DomainSpec, sample_domain
from ..core.metrics import alignment_error
from ..exceptions import (
    ConfigException,
    DegenerateInputException,
    DesignException,
    DesignSizeException,
    DimensionException,
    DomainException,
    OrdinalEmbeddingException,
)
from ..utils.report import emit_report, write_lemma_table
from ..utils.serialization import (
    read_cloud,
    read_embedding,
    write_cloud,
    write_comparisons,
    write_embedding,
    write_json,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Errores de uso o de entrada: código de salida 2
USAGE_ERRORS = (
    ConfigException,
    DesignException,
    DomainException,
    DimensionException,
    DegenerateInputException,
    ValidationError,
    OSError,
)
HANDLED_ERRORS = USAGE_ERRORS + (OrdinalEmbeddingException,)


class CLI:
    """Interfaz de línea de comandos principal"""

    def __init__(self):
        self.console = Console()

    def setup_parser(self) -> argparse.ArgumentParser:
        """Configura el parser de argumentos"""
        parser = argparse.ArgumentParser(
            prog='ordinal-embedding',
            description="Ordinal Embedding Tool - Embebido a partir de comparaciones de distancias",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Ejemplos de uso:
  %(prog)s gen --n 200 --dim 2 --seed 7 --out data/
  %(prog)s embed --cloud data/cloud.json --kind local --radius 0.8 --out run/
  %(prog)s eval --cloud data/cloud.json --embedding run/embedding.json --kind local --radius 0.8
  %(prog)s rates --config experiments/quadruple.json
  %(prog)s lemmas --seed 1
            """
        )

        # Opción global de depuración
        parser.add_argument(
            '--debug', action='store_true', help='Activa el logging en nivel DEBUG'
        )

        # Flags comunes a todos los subcomandos
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--config', help='Archivo JSON de configuración')
        common.add_argument('--seed', type=int, help='Semilla maestra (u64, por defecto 0)')
        common.add_argument('--out', default='.', help='Directorio de salida (por defecto: .)')
        common.add_argument(
            '--format', choices=['csv', 'json'], default='json', help='Formato de salida'
        )

        # Flags del diseño de comparaciones
        design_flags = argparse.ArgumentParser(add_help=False)
        design_flags.add_argument('--cloud', required=True, help='Nube de puntos (JSON de `gen`)')
        design_flags.add_argument('--kind', choices=DESIGN_KINDS, default='quadruple')
        design_flags.add_argument('--radius', type=float, help='Radio r del diseño local')
        design_flags.add_argument('--neighbors', type=int, help='K del diseño local o K-NN')
        design_flags.add_argument('--landmarks', type=int, help='Número de landmarks ℓ')
        design_flags.add_argument(
            '--transform', choices=sorted(BUILTIN_TRANSFORMS), default='identity',
            help='Transformación creciente g aplicada a las distancias'
        )
        design_flags.add_argument(
            '--jitter', action='store_true', help='Rompe empates con ruido mínimo'
        )

        subparsers = parser.add_subparsers(dest='command', help='Comandos disponibles')

        gen_parser = subparsers.add_parser(
            'gen', parents=[common], help='Muestrea una nube uniforme en el dominio'
        )
        gen_parser.add_argument('--n', type=int, required=True, help='Número de puntos')
        gen_parser.add_argument(
            '--dim', type=int, default=2, help='Dimensión de la bola unidad por defecto'
        )

        subparsers.add_parser(
            'design', parents=[common, design_flags],
            help='Construye un diseño y exporta su descriptor y comparaciones'
        )

        embed_parser = subparsers.add_parser(
            'embed', parents=[common, design_flags], help='Ejecuta un embedder sobre un diseño'
        )
        embed_parser.add_argument(
            '--embedder', choices=['refine', 'rejection', 'landmark'], default='refine'
        )
        embed_parser.add_argument('--dim', type=int, help='Dimensión del embedding (por defecto: la de la nube)')
        embed_parser.add_argument('--init', choices=['random', 'spectral'], default='random')
        embed_parser.add_argument('--iterations', type=int, default=2000)
        embed_parser.add_argument('--restarts', type=int, default=5)
        embed_parser.add_argument('--learning-rate', type=float, default=0.05)
        embed_parser.add_argument(
            '--enforce-outside', action='store_true',
            help='Añade la restricción fuera de ventana (diseños locales)'
        )
        embed_parser.add_argument(
            '--placement', choices=['monte_carlo', 'chebyshev'], default='monte_carlo'
        )
        embed_parser.add_argument('--max-draws', type=int, default=1_000_000)

        eval_parser = subparsers.add_parser(
            'eval', parents=[common, design_flags],
            help='Alineación y verificación de un embedding'
        )
        eval_parser.add_argument('--embedding', required=True, help='Embedding (JSON o CSV)')
        eval_parser.add_argument(
            '--mode', default='exact', help='exhaustive, exact o sampled(k)'
        )

        subparsers.add_parser(
            'rates', parents=[common], help='Experimento de tasas definido por --config'
        )

        lemmas_parser = subparsers.add_parser(
            'lemmas', parents=[common], help='Ejecuta la batería de certificadores'
        )
        lemmas_parser.add_argument(
            '--only', nargs='+', choices=[name for name, _ in LEMMA_CHECKS],
            help='Limita la batería a estas comprobaciones'
        )
        lemmas_parser.add_argument(
            '--inject-collinear', action='store_true',
            help='Inyecta símplices colineales para probar las precondiciones'
        )

        return parser

    def _configure_logging(self, debug: bool) -> None:
        level = logging.DEBUG if debug else getattr(logging, settings.log_level.upper(), logging.INFO)
        logging.basicConfig(level=level, format=LOG_FORMAT)

    def _fail(self, error: Exception, context: str) -> int:
        detail = getattr(error, 'detail', None) or str(error)
        print(f"❌ Error en {context}: {detail}")
        return 2 if isinstance(error, USAGE_ERRORS) else 1

    @staticmethod
    def _seed(args) -> int:
        return 0 if getattr(args, 'seed', None) is None else args.seed

    def _design_from_args(self, args):
        cloud = read_cloud(args.cloud)
        oracle = DissimilarityOracle(
            cloud, args.transform, jitter=args.jitter, jitter_seed=self._seed(args)
        )
        cset = build_design(
            oracle, args.kind,
            radius=args.radius, neighbors=args.neighbors, landmarks=args.landmarks,
        )
        return cloud, cset

    def run_gen(self, args):
        """Ejecuta el comando de muestreo de nubes"""
        try:
            if args.config:
                domain = load_experiment_config(args.config).domain.to_domain()
            else:
                domain = DomainSpec.unit_ball(args.dim)
            print(f"🔍 Muestreando {args.n} puntos en dimensión {domain.dim}...")
            cloud = sample_domain(domain, args.n, self._seed(args))
            path = write_cloud(cloud, os.path.join(args.out, 'cloud.json'))
            print(f"✅ Nube guardada: {path}")
        except HANDLED_ERRORS as e:
            return self._fail(e, 'gen')

        return 0

    def run_design(self, args):
        """Ejecuta el comando de construcción de diseños"""
        try:
            print(f"🔍 Construyendo diseño {args.kind} sobre {args.cloud}...")
            _, cset = self._design_from_args(args)
            descriptor = dict(cset.descriptor(), query_budget=cset.query_budget())
            path = write_json(descriptor, os.path.join(args.out, 'design.json'))
            print(f"✅ Descriptor guardado: {path}")
            print(f"📊 Consultas informativas: {descriptor['query_budget']}")
            try:
                tuples = cset.materialize()
            except DesignSizeException as e:
                print(f"⚠️  Sin exportar comparaciones: {e.detail}")
            else:
                csv_path = write_comparisons(tuples, os.path.join(args.out, 'comparisons.csv'))
                print(f"✅ {len(tuples)} comparaciones guardadas: {csv_path}")
        except HANDLED_ERRORS as e:
            return self._fail(e, 'design')

        return 0

    def run_embed(self, args):
        """Ejecuta el comando de embedding"""
        try:
            cloud, cset = self._design_from_args(args)
            dim = args.dim or cloud.dim
            schedule = RefineSchedule(
                iterations=args.iterations,
                restarts=args.restarts,
                learning_rate=args.learning_rate,
                enforce_outside=args.enforce_outside,
                workers=settings.workers,
            )
            print(f"🔍 Embedding {args.embedder} de {cset.n} ítems en dimensión {dim}...")
            if args.embedder == 'rejection':
                embedding, report = exact_rejection_embed(cset, dim, self._seed(args), max_draws=args.max_draws)
            elif args.embedder == 'landmark':
                embedding, report = landmark_embed(
                    cset, dim, self._seed(args),
                    placement=args.placement, schedule=schedule, max_draws=args.max_draws,
                )
            else:
                embedding, report = refine_embed(
                    cset, dim, self._seed(args), init=args.init, schedule=schedule
                )
            ext = 'csv' if args.format == 'csv' else 'json'
            path = write_embedding(embedding, os.path.join(args.out, f'embedding.{ext}'), ext)
            write_json(report.to_dict(), os.path.join(args.out, 'embed_report.json'))
            print(f"✅ Embedding guardado: {path}")
            print(f"📊 Violaciones: {report.violations} (iteraciones: {report.iterations})")
        except HANDLED_ERRORS as e:
            return self._fail(e, 'embed')

        return 0 if report.violations == 0 else 1

    def run_eval(self, args):
        """Ejecuta el comando de evaluación"""
        try:
            cloud, cset = self._design_from_args(args)
            embedding = read_embedding(args.embedding)
            print(f"🔍 Evaluando {args.embedding} contra {args.cloud}...")
            alignment = alignment_error(embedding, cloud)
            report = verify_embedding(embedding, cset, mode=args.mode, seed=self._seed(args))
            result = {
                'alignment': alignment.to_dict(),
                'verification': report.to_dict(),
                'design': cset.descriptor(),
            }
            path = write_json(result, os.path.join(args.out, 'eval.json'))
            print(f"📊 Error sup de alineación: {alignment.sup_error:.6g}")
            print(f"📊 Violaciones ({args.mode}): {report.violations}")
            print(f"✅ Evaluación guardada: {path}")
        except HANDLED_ERRORS as e:
            return self._fail(e, 'eval')

        return 0 if report.violations == 0 else 1

    def run_rates(self, args):
        """Ejecuta el experimento de tasas"""
        if not args.config:
            print("❌ El comando rates necesita --config")
            return 2
        try:
            config = load_experiment_config(args.config)
            updates = {}
            if args.seed is not None:
                updates['master_seed'] = args.seed
            if args.out != '.':
                updates['output_dir'] = args.out
            if updates:
                config = config.model_copy(update=updates)
            print(f"🔍 Experimento {config.design.kind}: n = {config.n_grid}, {config.trials} ensayos...")
            result = run_rate_experiment(config)
            formats = (args.format, 'svg') if args.format == 'csv' else ('csv', 'json', 'svg')
            written = emit_report(result, config.output_dir, formats)
        except HANDLED_ERRORS as e:
            return self._fail(e, 'rates')

        slope = 'indefinida' if result.slope is None else f"{result.slope:.3f}"
        print(f"📊 Pendiente log-log: {slope}; excluidos: {result.excluded}")
        for kind, path in sorted(written.items()):
            print(f"✅ {kind}: {path}")
        for gate, passed in sorted(result.gates.items()):
            mark = '✅' if passed else '❌'
            print(f"{mark} Umbral {gate}: {passed}")
        if not result.eps_monotone:
            print(f"❌ ε_n creció con n en (ensayo, n): {result.eps_increases}")
        return 0 if result.passed else 1

    def run_lemmas(self, args):
        """Ejecuta la batería de certificadores"""
        try:
            checks = run_lemma_suite(
                self._seed(args), inject_collinear=args.inject_collinear, only=args.only
            )
        except HANDLED_ERRORS as e:
            return self._fail(e, 'lemmas')

        table = Table(title=f"Certificadores (semilla {self._seed(args)})")
        table.add_column("check")
        table.add_column("estado")
        table.add_column("holgura", justify="right")
        table.add_column("detalle")
        styles = {'pass': 'green', 'fail': 'red', 'inapplicable': 'yellow'}
        for check in checks:
            slack = '-' if check.slack is None else f"{check.slack:.3g}"
            table.add_row(
                check.name, f"[{styles[check.status]}]{check.status}[/]", slack, check.detail
            )
        self.console.print(table)

        if args.out != '.':
            try:
                written = write_lemma_table(checks, args.out)
                print(f"✅ Tabla guardada: {written[args.format]}")
            except OSError as e:
                return self._fail(e, 'lemmas')

        return 1 if any(c.status == 'fail' for c in checks) else 0

    def run(self, argv: Optional[List[str]] = None):
        """Ejecuta la interfaz CLI"""
        parser = self.setup_parser()
        args = parser.parse_args(argv)

        if not args.command:
            parser.print_help()
            return 0

        self._configure_logging(args.debug)

        # Mapear comandos a métodos
        command_map = {
            'gen': self.run_gen,
            'design': self.run_design,
            'embed': self.run_embed,
            'eval': self.run_eval,
            'rates': self.run_rates,
            'lemmas': self.run_lemmas,
        }

        command_func = command_map.get(args.command)
        if command_func:
            return command_func(args)
        else:
            print(f"❌ Comando desconocido: {args.command}")
            return 2


def main():
    """Función principal"""
    cli = CLI()
    sys.exit(cli.run())


if __name__ == '__main__':
    main()
