# Configuration file for the Sphinx documentation builder.

import sys

sys.path.insert(0, "..")

from minerr import __version__

project = "minerr"
copyright = "2026, minerr developers"
author = "minerr developers"
release = __version__

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "numpydoc",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
]

# the Methods sections are written by hand.
numpydoc_show_class_members = False

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"
language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

html_theme = "alabaster"
html_static_path = ["_static"]
htmlhelp_basename = "minerrdoc"

latex_documents = [
    (master_doc, "minerr.tex", "minerr Documentation", author, "manual"),
]

man_pages = [(master_doc, "minerr", "minerr Documentation", [author], 1)]
