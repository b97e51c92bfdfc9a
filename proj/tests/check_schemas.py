"""Cross-checks the shipped schemas with the reference jsonschema validator.

Every schema must be a valid draft 2020-12 document and the golden prompt
bundles must validate.
Exits 0 with a skip notice when jsonschema is not installed.
"""
import json
import pathlib
import sys


def main() -> int:
    schemas, fixtures = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    try:
        import jsonschema
    except ImportError:
        print("jsonschema not installed; skipping")
        return 0

    loaded = {}
    for path in sorted(schemas.glob("*.schema.json")):
        schema = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(schema)
        loaded[path.name] = schema
        print(f"ok schema {path.name}")

    bundle_schema = loaded["prompt_bundle.schema.json"]
    for path in sorted((fixtures / "golden").glob("*_bundle.json")):
        jsonschema.validate(json.loads(path.read_text()), bundle_schema)
        print(f"ok bundle {path.name}")

    bad = json.loads((fixtures / "golden" / "fig2_zero_shot_bundle.json").read_text())
    bad["mode"] = "many_shot"
    try:
        jsonschema.validate(bad, bundle_schema)
    except jsonschema.ValidationError:
        print("ok rejects unknown mode")
    else:
        print("schema accepted an unknown prompt mode")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
