#
# MFLQR documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import os
import sys

# The package is documented from the source tree, one level up.
sys.path.insert(0, os.path.abspath(".."))

# -- General configuration -----------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.doctest",
    "sphinx.ext.coverage",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.inheritance_diagram",
    "sphinx.ext.intersphinx",
]

# generate autosummary pages
autosummary_generate = True

# include class and __init__ docstring
autoclass_content = "both"

# http://sphinx-doc.org/latest/ext/autodoc.htm#confval-autodoc_member_order
autodoc_member_order = "bysource"

templates_path = ["_templates"]

source_suffix = ".rst"

master_doc = "index"

# General information about the project.
project = "MFLQR"
copyright = "2024, MFLQR developers"

# This should match the version in pyproject.toml
version = "0.1.0"
# The full version, including alpha/beta/rc tags.
release = "0.1.0.dev"

exclude_patterns = ["_build"]

pygments_style = "sphinx"

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
}

# -- Options for HTML output ---------------------------------------------------

html_theme = "sphinx_rtd_theme"

# If true, links to the reST sources are added to the pages.
html_show_sourcelink = True

autodoc_inherit_docstrings = True  # If no docstring, inherit from base class

add_module_names = False  # Remove namespaces from class/method signatures

htmlhelp_basename = "MFLQRdoc"

# -- Options for LaTeX output --------------------------------------------------

latex_elements = {}

latex_documents = [
    ("index", "MFLQR.tex", "MFLQR Documentation", "MFLQR developers", "manual"),
]

# -- Options for manual page output --------------------------------------------

man_pages = [("index", "mflqr", "MFLQR Documentation", ["MFLQR developers"], 1)]
