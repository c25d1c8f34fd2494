from momentlab.utils import *

__version__ = "0.1.0"
