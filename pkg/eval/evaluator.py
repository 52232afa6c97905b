"""Acceptance harness: desk-scale training runs on synthetic stereo scenes."""

import sqlite3
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

# Allow running as `python eval/evaluator.py` from the project root
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.config import ArchPreset, CorrelationMode
from stereo.data import StereoSample, SynthConfig, synth_generate
from stereo.inference import NON_OCC, MetricsReport, image_records, infer
from stereo.inference.metrics import AGGREGATE
from stereo.training import TrainConfig, train


class AcceptanceEvaluator:
    """Run the cases in ``eval/acceptance.yml`` and keep a history of results."""

    def __init__(self, cases_file: str = "eval/acceptance.yml", results_db: str = "eval/results.db"):
        self.cases_file = Path(cases_file)
        self.cases = self._load_cases()
        self.results_db = Path(results_db)
        self._init_results_db()

    def _load_cases(self) -> List[Dict]:
        if not self.cases_file.exists():
            raise FileNotFoundError(f"Acceptance cases file not found: {self.cases_file}")
        with open(self.cases_file, "r") as f:
            data = yaml.safe_load(f)
        return data.get("acceptance_cases", [])

    def _init_results_db(self):
        """Create the run and case tables on first use."""
        self.results_db.parent.mkdir(parents=True, exist_ok=True)
        conn = sqlite3.connect(self.results_db)
        cursor = conn.cursor()
        cursor.execute(
            """
        CREATE TABLE IF NOT EXISTS acceptance_runs (
            run_id TEXT PRIMARY KEY,
            timestamp TEXT,
            total_cases INTEGER,
            passed_cases INTEGER,
            failed_cases INTEGER,
            elapsed_s REAL
        )
        """
        )
        cursor.execute(
            """
        CREATE TABLE IF NOT EXISTS case_results (
            run_id TEXT,
            case_id TEXT,
            arch TEXT,
            error_pct REAL,
            final_loss REAL,
            elapsed_s REAL,
            passed INTEGER,
            FOREIGN KEY (run_id) REFERENCES acceptance_runs (run_id)
        )
        """
        )
        conn.commit()
        conn.close()

    @staticmethod
    def _train_config(case: Dict, arch: str) -> TrainConfig:
        return TrainConfig(
            arch=ArchPreset(arch),
            correlation=CorrelationMode(case.get("correlation", "learned")),
            max_disp=case["max_disp"],
            iterations=case["iterations"],
            batch_size=case.get("batch_size"),
            theta=case.get("theta", 64),
            in_channels=1,
            seed=case.get("seed", 0),
        )

    @staticmethod
    def _scenes(case: Dict, overrides: Optional[Dict] = None) -> List[StereoSample]:
        settings = dict(case["synth"], max_disp=case["max_disp"])
        settings.update(overrides or {})
        return synth_generate(SynthConfig(**settings))

    @staticmethod
    def score(model, samples: List[StereoSample], threshold: float, subset: str = NON_OCC) -> float:
        """Pixel-weighted error over ``samples`` for one threshold and subset."""
        records = []
        for sample in samples:
            prediction = infer(model, sample.left, sample.right)
            records.extend(
                image_records(sample.id, prediction.disparity, sample.gt, sample.gt_valid, sample.noc, (threshold,))
            )
        return MetricsReport(records).error(AGGREGATE, threshold, subset)

    def _run_arch(self, case: Dict, arch: str, train_set, eval_set) -> Dict:
        started = time.perf_counter()
        cfg = self._train_config(case, arch)
        result = train(cfg, train_set)
        error = self.score(result.model, eval_set, case["threshold"], case.get("subset", NON_OCC))
        return {
            "arch": arch,
            "error_pct": error,
            "final_loss": result.history[-1]["loss"] if result.history else float("nan"),
            "elapsed_s": time.perf_counter() - started,
        }

    def evaluate_case(self, case: Dict) -> Dict:
        """Train and score every arch of one case; ``passed`` follows the case kind."""
        train_set = self._scenes(case)
        if case["kind"] == "overfit":
            eval_set = train_set
        elif case["kind"] == "ordering":
            eval_set = self._scenes(case, case.get("heldout"))
        else:
            raise ValueError(f"unknown acceptance case kind: {case['kind']}")

        runs = [self._run_arch(case, arch, train_set, eval_set) for arch in case["archs"]]
        errors = [run["error_pct"] for run in runs]
        if case["kind"] == "overfit":
            passed = all(np.isfinite(errors)) and max(errors) < case["max_error_pct"]
        else:
            passed = all(later <= earlier for earlier, later in zip(errors, errors[1:]))
        for run in runs:
            run["passed"] = passed
        return {"case_id": case["id"], "category": case.get("category", "unknown"), "runs": runs, "passed": passed}

    def run_evaluation(self, run_id: Optional[str] = None, case_ids: Optional[List[str]] = None) -> Dict:
        """Run the selected cases (all by default) and store the results."""
        run_id = run_id or f"run_{datetime.now().strftime('%Y%m%d_%H%M%S')}"
        cases = [c for c in self.cases if not case_ids or c["id"] in case_ids]
        print(f"🚀 Starting acceptance run: {run_id}")
        print(f"📝 Running {len(cases)} cases")

        started = time.perf_counter()
        case_results = []
        for i, case in enumerate(cases, 1):
            print(f"\n[{i}/{len(cases)}] {case['id']} ({case['kind']})")
            result = self.evaluate_case(case)
            case_results.append(result)
            for run in result["runs"]:
                print(f"  {run['arch']}: error={run['error_pct']:.2f}% loss={run['final_loss']:.4f} ({run['elapsed_s']:.0f}s)")
            print(f"  {'✅ passed' if result['passed'] else '❌ failed'}")

        passed = sum(1 for r in case_results if r["passed"])
        summary = {
            "run_id": run_id,
            "timestamp": datetime.now().isoformat(),
            "total_cases": len(case_results),
            "passed_cases": passed,
            "failed_cases": len(case_results) - passed,
            "elapsed_s": time.perf_counter() - started,
            "case_results": case_results,
        }
        self._store_results(summary)
        self._print_summary(summary)
        return summary

    def _store_results(self, summary: Dict):
        conn = sqlite3.connect(self.results_db)
        cursor = conn.cursor()
        cursor.execute(
            """
        INSERT INTO acceptance_runs (run_id, timestamp, total_cases, passed_cases, failed_cases, elapsed_s)
        VALUES (?, ?, ?, ?, ?, ?)
        """,
            (
                summary["run_id"],
                summary["timestamp"],
                summary["total_cases"],
                summary["passed_cases"],
                summary["failed_cases"],
                summary["elapsed_s"],
            ),
        )
        for case in summary["case_results"]:
            for run in case["runs"]:
                cursor.execute(
                    """
                INSERT INTO case_results (run_id, case_id, arch, error_pct, final_loss, elapsed_s, passed)
                VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                    (
                        summary["run_id"],
                        case["case_id"],
                        run["arch"],
                        run["error_pct"],
                        run["final_loss"],
                        run["elapsed_s"],
                        int(run["passed"]),
                    ),
                )
        conn.commit()
        conn.close()

    def _print_summary(self, summary: Dict):
        print("\n" + "=" * 60)
        print("📊 ACCEPTANCE SUMMARY")
        print("=" * 60)
        print(f"Run ID: {summary['run_id']}")
        print(f"Cases: {summary['passed_cases']}/{summary['total_cases']} passed")
        print(f"Elapsed: {summary['elapsed_s']:.0f}s")
        failed = [c["case_id"] for c in summary["case_results"] if not c["passed"]]
        if failed:
            print("\n❌ FAILED CASES:")
            for case_id in failed:
                print(f"  {case_id}")
        print("=" * 60)

    def get_historical_results(self, limit: int = 10) -> List[Dict]:
        conn = sqlite3.connect(self.results_db)
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM acceptance_runs ORDER BY timestamp DESC LIMIT ?", (limit,))
        columns = [desc[0] for desc in cursor.description]
        results = [dict(zip(columns, row)) for row in cursor.fetchall()]
        conn.close()
        return results


def main():
    """Main acceptance script."""
    import argparse

    parser = argparse.ArgumentParser(description="Run desk-scale stereo acceptance cases")
    parser.add_argument("--run-id", help="Custom run ID")
    parser.add_argument("--cases-file", default="eval/acceptance.yml", help="Acceptance cases file")
    parser.add_argument("--case", action="append", dest="cases", help="Run only this case id (repeatable)")
    parser.add_argument("--history", action="store_true", help="Show historical results")
    args = parser.parse_args()

    evaluator = AcceptanceEvaluator(args.cases_file)
    if args.history:
        print("📊 Historical Results:")
        for result in evaluator.get_historical_results():
            print(f"  {result['run_id']}: {result['passed_cases']}/{result['total_cases']} passed")
        return
    summary = evaluator.run_evaluation(args.run_id, args.cases)
    raise SystemExit(0 if summary["failed_cases"] == 0 else 1)


if __name__ == "__main__":
    main()
