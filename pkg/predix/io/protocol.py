import pathlib


class IOProtocol:
    """
    Base class of file format handlers. Subclasses set `name` (the format name
    accepted by the `fmt` arguments of the load and save functions) and
    `extensions` (lowercase, primary first), and implement `load()` and `save()`.
    """

    name = ''
    extensions = ()

    @classmethod
    def matches(cls, filename):
        return str(filename).lower().endswith(tuple(cls.extensions))

    @classmethod
    def enforce_extension(cls, filename):
        """
        Replace the suffix of a filename with the primary format extension, unless
        it already carries one of the format's extensions.
        """
        if cls.matches(filename) or not cls.extensions:
            return filename
        return pathlib.Path(filename).with_suffix(cls.extensions[0])

    def load(self, filename):
        raise NotImplementedError(f'reading {self.name} files is not supported')

    def save(self, obj, filename):
        raise NotImplementedError(f'writing {self.name} files is not supported')


def select_protocol(protocols, filename, fmt=None):
    """
    Select the handler of a file, by format name if `fmt` is given and by
    filename extension otherwise.

    Parameters
    ----------
    protocols : list of IOProtocol subclasses
        Candidate handlers.
    filename : str
        File path.
    fmt : str, optional
        Explicit format name.

    Returns
    -------
    IOProtocol subclass
    """
    if fmt is not None:
        fmt = fmt.lower()
        iop = next((p for p in protocols if p.name == fmt), None)
        if iop is None:
            names = ', '.join(p.name for p in protocols)
            raise ValueError(f'unknown file format {fmt}, expected one of: {names}')
        return iop

    iop = next((p for p in protocols if p.matches(filename)), None)
    if iop is None:
        raise ValueError(f'cannot determine file format from extension for {filename}')
    return iop
