"""Static page assembly."""

import html
import json

_PAGE = """<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>lambda-lab report</title>
<style>
body {{ font-family: sans-serif; max-width: 60rem; margin: 2rem auto; }}
img {{ max-width: 100%; border: 1px solid #ccc; margin: 0.4rem 0; }}
table {{ border-collapse: collapse; }}
td, th {{ border: 1px solid #bbb; padding: 0.2rem 0.6rem; text-align: left; }}
h2 {{ border-bottom: 1px solid #ddd; }}
</style>
</head>
<body>
<h1>lambda-lab report</h1>
{sections}
</body>
</html>
"""


def _table(pairs):
    rows = "\n".join(
        f"<tr><th>{html.escape(str(k))}</th><td>{html.escape(_fmt(v))}</td></tr>"
        for k, v in pairs)
    return f"<table>\n{rows}\n</table>"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return str(v)


def render_page(sections):
    """sections: list of (title, figure file names, key-value pairs)."""
    parts = []
    for title, figures, pairs in sections:
        body = "\n".join(f'<img src="{name}" alt="{name}">' for name in figures)
        if pairs:
            body += "\n" + _table(pairs)
        parts.append(f"<h2>{html.escape(title)}</h2>\n{body}")
    return _PAGE.format(sections="\n".join(parts))
