import os
import warnings


# one-line warnings without the source line
def formatwarning(message, category, filename, lineno, line=None):
    return f'{category.__name__}: {message}\n'
warnings.formatwarning = formatwarning


def output_root(path=None):
    """
    Root directory of experiment outputs. An explicit path takes precedence over
    the PREDIX_OUTPUT environment variable, which falls back to `./predix-output`.
    """
    if path is not None:
        return str(path)
    return os.environ.get('PREDIX_OUTPUT', os.path.abspath('predix-output'))


def vmpeak():
    """
    Peak virtual memory of the process in kilobytes, or None where
    `/proc/self/status` is unavailable.
    """
    try:
        with open('/proc/self/status') as file:
            for line in file:
                if line.startswith('VmPeak'):
                    return int(line.split()[1])
    except OSError:
        pass
    return None
