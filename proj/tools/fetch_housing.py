#!/usr/bin/env python3
"""Download the California Housing table and write the CSV + schema pair the
acceptance suite and the CLI expect.

Usage: python3 tools/fetch_housing.py [OUT_DIR]    (default: tests/data)
"""
import json
import sys
from pathlib import Path

from sklearn.datasets import fetch_california_housing


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("tests/data")
    out_dir.mkdir(parents=True, exist_ok=True)

    data = fetch_california_housing(as_frame=True)
    frame = data.frame  # 8 numeric features + MedHouseVal target
    csv_path = out_dir / "california_housing.csv"
    frame.to_csv(csv_path, index=False)

    schema = {
        "columns": [{"name": c, "kind": "numeric"} for c in data.feature_names],
        "target": "MedHouseVal",
        "task": "regression",
    }
    schema_path = out_dir / "california_housing.schema.json"
    schema_path.write_text(json.dumps(schema, indent=2))
    print(f"wrote {csv_path} ({len(frame)} rows) and {schema_path}")


if __name__ == "__main__":
    main()
