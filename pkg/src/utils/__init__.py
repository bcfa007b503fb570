"""Utility functions package."""

from src.utils.file_utils import *
from src.utils.result_file_manager import ResultFileManager
