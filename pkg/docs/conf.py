# Configuration file for the Sphinx documentation builder.
#
# For the full list of options see
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import sys
from pathlib import Path

HERE = Path(__file__).parent
sys.path[:0] = [str(HERE.parent)]

from pycmc import __version__  # noqa: E402

# -- Project information -----------------------------------------------------
needs_sphinx = "4.3"

project = "pycmc"
copyright = "2026, pycmc developers"
author = "pycmc developers"

version = __version__
release = __version__

# -- General configuration ---------------------------------------------------
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.viewcode",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx_autodoc_typehints",  # needs to be after napoleon
    "sphinx.ext.autosummary",
    "sphinx_copybutton",
]

templates_path = ["_templates"]
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

autosummary_generate = True
autodoc_member_order = "bysource"
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_include_init_with_doc = False
napoleon_use_rtype = True
napoleon_use_param = True
napoleon_custom_sections = [("Examples", "Examples")]

master_doc = "index"

intersphinx_mapping = dict(
    numpy=("https://numpy.org/doc/stable/", None),
    pandas=("https://pandas.pydata.org/docs/", None),
    python=("https://docs.python.org/3", None),
    scipy=("https://docs.scipy.org/doc/scipy/reference/", None),
)

language = "en"
pygments_style = "default"

# -- Options for HTML output -------------------------------------------------
html_theme = "furo"
html_title = "pycmc"
html_show_sphinx = False

htmlhelp_basename = "pycmc"

# -- Options for manual page output ------------------------------------------
man_pages = [(master_doc, "pycmc", "pycmc Documentation", [author], 1)]
