"""Exceptions raised by the acoustic modem."""


class ModemError(ValueError):
    pass


class UncorrectableError(ModemError):
    """A Reed-Solomon block carries more errors than its parity can repair."""


class PayloadTooLarge(ModemError):
    pass


class IndexOutOfRange(ModemError):
    pass


class RateMismatch(ModemError):
    pass


class UnsupportedWav(ModemError):
    pass
