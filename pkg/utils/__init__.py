"""Logging, exceptions, validators and geodesy shared across packages."""
from utils.exceptions import MTraceError
from utils.log import logger

# validators are imported from utils.validators directly; they depend on model
__all__ = ['MTraceError', 'logger']
