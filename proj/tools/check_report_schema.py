#!/usr/bin/env python3
# Copyright 2026 The seqsynth Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Validate report.json files against the shipped metric report schema.

With --seqsynth, first runs a small simulate/train/generate/evaluate
pipeline in a temporary directory and validates the reports it writes
(one with ML inference on, one with it off).
"""

import argparse
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def validate(schema, path):
    report = json.loads(pathlib.Path(path).read_text())
    jsonschema.validate(report, schema, cls=jsonschema.Draft202012Validator)
    print(f"ok  {path}")


def pipeline(exe, configs, work):
    def run(*args):
        subprocess.run([exe, *map(str, args)], check=True, stdout=subprocess.DEVNULL)

    data, model, syn = work / "data", work / "model", work / "syn"
    run("simulate", "--config", configs / "scenario_default.toml", "--seed", 1, "--out", data)
    run("train", "--data", data, "--config", configs / "train_tiny.toml", "--out", model)
    run("generate", "--checkpoint", model / "checkpoint.json", "--data", data, "--out", syn)

    quick = (configs / "evaluate_quick.toml").read_text()
    no_ml = work / "evaluate_no_ml.toml"
    no_ml.write_text(quick.replace("ml_inference = true", "ml_inference = false"))

    reports = []
    for name, cfg in (("eval", configs / "evaluate_quick.toml"), ("eval_no_ml", no_ml)):
        run("evaluate", "--real", data, "--synthetic", syn, "--config", cfg, "--out", work / name)
        reports.append(work / name / "report.json")
    return reports


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--schema", required=True)
    ap.add_argument("--seqsynth", help="path to the seqsynth executable")
    ap.add_argument("--configs", help="directory with the shipped example configs")
    ap.add_argument("reports", nargs="*")
    args = ap.parse_args()

    schema = json.loads(pathlib.Path(args.schema).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)

    reports = list(args.reports)
    with tempfile.TemporaryDirectory(prefix="seqsynth_schema_") as tmp:
        if args.seqsynth:
            reports += pipeline(args.seqsynth, pathlib.Path(args.configs), pathlib.Path(tmp))
        if not reports:
            ap.error("nothing to validate")
        for r in reports:
            validate(schema, r)
        if args.seqsynth:
            off = json.loads(pathlib.Path(reports[-1]).read_text())
            if off["ml_inference"] is not None:
                sys.exit("ml_inference should be null when disabled")
    return 0


if __name__ == "__main__":
    sys.exit(main())
