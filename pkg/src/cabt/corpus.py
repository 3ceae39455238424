"""Bundled TK32 test programs (assembly sources and prebuilt images)."""

from importlib import resources

from cabt.image import load_image

PROGRAMS = ("gcd", "sieve", "fir", "biquad", "dpcm", "subband_stub")
IO_PROGRAMS = ("uart_echo",)
ALL_PROGRAMS = PROGRAMS + IO_PROGRAMS

# input fed to the uart of uart_echo and the output it must produce
UART_INPUT = b"hello, tk32!\n"
UART_OUTPUT = b"> HELLO, TK32!\n"


def _files():
    return resources.files("cabt.data.programs")


def source(name) -> str:
    return _files().joinpath(f"{name}.asm").read_text()


def image_text(name) -> str:
    return _files().joinpath(f"{name}.img").read_text()


def load_program(name):
    return load_image(image_text(name))


def programs(names=PROGRAMS):
    return [(n, load_program(n)) for n in names]
