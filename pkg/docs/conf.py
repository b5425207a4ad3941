# -*- coding: utf-8 -*-
#
# structsplat documentation build configuration file.

import sys
import os

sys.path.insert(0, os.path.abspath('..'))

from structsplat import __version__  # noqa

# -- General configuration ------------------------------------------------

extensions = []

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

project = u'structsplat'
copyright = u'2026, structsplat contributors'

version = __version__
release = __version__

exclude_patterns = ['_build']

pygments_style = 'sphinx'

# -- Options for HTML output ----------------------------------------------

html_theme = 'default'

html_static_path = ['_static']

htmlhelp_basename = 'structsplatdoc'

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('cli', 'structsplat', u'structsplat command line', [u'structsplat contributors'], 1)
]
