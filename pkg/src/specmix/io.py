"""Hyperspectral cube, spectral library and abundance map file formats.

A cube is stored as two files sharing a stem: ``<stem>.hdr`` is an ASCII
``key=value`` header and ``<stem>.raw`` holds little-endian float32 values,
pixel-major with the band index varying fastest. Pixel ``i`` of the
flattened cube is ``row * cols + col``; every module uses that ordering.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import CubeFormatError

__all__ = [
    "HyperCube",
    "SpectralLibrary",
    "AbundanceCube",
    "read_cube",
    "write_cube",
    "read_spectral_library",
    "write_spectral_library",
    "write_abundance_maps",
    "read_abundance_maps",
    "write_pgm",
    "read_pgm",
]

PAYLOAD_DTYPE = np.dtype("<f4")
HEADER_SUFFIX = ".hdr"
PAYLOAD_SUFFIX = ".raw"
_REQUIRED_KEYS = ("rows", "cols", "bands", "dtype", "byteorder", "interleave")
_OPTIONAL_KEYS = ("wavelengths",)
ABUNDANCE_MANIFEST = "abundance_manifest.txt"


def _first_nonfinite(data):
    rows, cols, bands = data.shape
    idx = np.argwhere(~np.isfinite(data))[0]
    return int(idx[0]) * cols + int(idx[1]), int(idx[2])


@dataclass(frozen=True, eq=False)
class HyperCube:
    """A reflectance cube of shape (rows, cols, bands) held as float32.

    ``wavelengths`` is optional; when given it must hold one strictly
    increasing value (micrometres) per band.
    """

    data: np.ndarray
    wavelengths: np.ndarray | None = None

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, order="C")
        if data.ndim != 3:
            raise ValueError(f"cube data must be 3-D (rows, cols, bands), got shape {data.shape}")
        if min(data.shape) < 1:
            raise ValueError(f"cube dimensions must be positive, got {data.shape}")
        if not np.all(np.isfinite(data)):
            pixel, band = _first_nonfinite(data)
            raise ValueError(f"non-finite value at pixel {pixel}, band {band}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

        if self.wavelengths is not None:
            wl = np.array(self.wavelengths, dtype=np.float64)
            if wl.shape != (data.shape[2],):
                raise ValueError(f"expected {data.shape[2]} wavelengths, got {wl.size}")
            if wl.size > 1 and not np.all(np.diff(wl) > 0):
                raise ValueError("wavelengths must be strictly increasing")
            wl.setflags(write=False)
            object.__setattr__(self, "wavelengths", wl)

    @classmethod
    def from_pixels(cls, pixels, rows, cols, wavelengths=None):
        """Build a cube from an (rows*cols, bands) matrix of pixel spectra."""
        pixels = np.asarray(pixels)
        return cls(pixels.reshape(rows, cols, pixels.shape[-1]), wavelengths)

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def bands(self):
        return self.data.shape[2]

    @property
    def n_pixels(self):
        return self.rows * self.cols

    @property
    def pixels(self):
        """(n_pixels, bands) view in row-major pixel order."""
        return self.data.reshape(-1, self.bands)

    def __eq__(self, other):
        if not isinstance(other, HyperCube):
            return NotImplemented
        if self.data.shape != other.data.shape or not np.array_equal(self.data, other.data):
            return False
        if (self.wavelengths is None) != (other.wavelengths is None):
            return False
        return self.wavelengths is None or np.array_equal(self.wavelengths, other.wavelengths)

    def __repr__(self):
        return f"HyperCube(rows={self.rows}, cols={self.cols}, bands={self.bands})"


@dataclass(frozen=True, eq=False)
class SpectralLibrary:
    """Named reference spectra sharing one band axis."""

    names: tuple
    spectra: np.ndarray
    wavelengths: np.ndarray | None = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        spectra = np.array(self.spectra, dtype=np.float64)
        if spectra.ndim != 2 or spectra.shape[0] != len(names):
            raise ValueError(
                f"spectra must be (n_entries, n_bands) with one row per name, got {spectra.shape}"
            )
        if any(not n.strip() for n in names):
            raise ValueError("spectrum names must be non-empty")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate spectrum names: {', '.join(dupes)}")
        if not np.all(np.isfinite(spectra)):
            raise ValueError("library spectra contain non-finite values")
        spectra.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "spectra", spectra)
        if self.wavelengths is not None:
            wl = np.array(self.wavelengths, dtype=np.float64)
            if wl.shape != (spectra.shape[1],):
                raise ValueError(f"expected {spectra.shape[1]} wavelengths, got {wl.size}")
            wl.setflags(write=False)
            object.__setattr__(self, "wavelengths", wl)

    @property
    def n_bands(self):
        return self.spectra.shape[1]

    def __len__(self):
        return len(self.names)

    def __eq__(self, other):
        if not isinstance(other, SpectralLibrary):
            return NotImplemented
        same_wl = (self.wavelengths is None and other.wavelengths is None) or (
            self.wavelengths is not None
            and other.wavelengths is not None
            and np.array_equal(self.wavelengths, other.wavelengths)
        )
        return (
            self.names == other.names
            and self.spectra.shape == other.spectra.shape
            and np.array_equal(self.spectra, other.spectra)
            and same_wl
        )


@dataclass(frozen=True, eq=False)
class AbundanceCube:
    """Per-pixel non-negative endmember fractions, shape (rows, cols, classes)."""

    data: np.ndarray
    class_names: tuple = field(default=())

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, order="C")
        if data.ndim != 3:
            raise ValueError(f"abundance data must be 3-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("abundances contain non-finite values")
        if np.any(data < 0):
            raise ValueError("abundances must be non-negative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        names = tuple(self.class_names) or tuple(f"class_{j}" for j in range(data.shape[2]))
        if len(names) != data.shape[2]:
            raise ValueError(f"expected {data.shape[2]} class names, got {len(names)}")
        object.__setattr__(self, "class_names", names)

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def classes(self):
        return self.data.shape[2]

    def __eq__(self, other):
        if not isinstance(other, AbundanceCube):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


# -- cube files ---------------------------------------------------------------


def cube_paths(path):
    """Return ``(header, payload)`` paths for a cube stem (a suffix is stripped)."""
    path = Path(path)
    if path.suffix in (HEADER_SUFFIX, PAYLOAD_SUFFIX):
        path = path.with_suffix("")
    return path.with_name(path.name + HEADER_SUFFIX), path.with_name(path.name + PAYLOAD_SUFFIX)


def _parse_header(text, source):
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CubeFormatError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _REQUIRED_KEYS + _OPTIONAL_KEYS:
            raise CubeFormatError(f"{source}:{lineno}: unknown header key {key!r}")
        if key in fields:
            raise CubeFormatError(f"{source}:{lineno}: duplicate header key {key!r}")
        fields[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in fields]
    if missing:
        raise CubeFormatError(f"{source}: missing header keys: {', '.join(missing)}")

    dims = {}
    for key in ("rows", "cols", "bands"):
        try:
            dims[key] = int(fields[key])
        except ValueError:
            raise CubeFormatError(f"{source}: {key} must be an integer, got {fields[key]!r}") from None
        if dims[key] < 1:
            raise CubeFormatError(f"{source}: {key} must be positive, got {dims[key]}")
    expected = {"dtype": "float32", "byteorder": "little", "interleave": "pixel"}
    for key, want in expected.items():
        if fields[key].lower() != want:
            raise CubeFormatError(f"{source}: unsupported {key}={fields[key]!r} (need {want})")

    wavelengths = None
    if "wavelengths" in fields:
        try:
            wavelengths = np.array([float(v) for v in fields["wavelengths"].split(",")])
        except ValueError:
            raise CubeFormatError(f"{source}: wavelengths must be comma-separated numbers") from None
    return dims["rows"], dims["cols"], dims["bands"], wavelengths


def _format_header(rows, cols, bands, wavelengths=None):
    lines = [
        "# specmix cube header",
        f"rows={rows}",
        f"cols={cols}",
        f"bands={bands}",
        "dtype=float32",
        "byteorder=little",
        "interleave=pixel",
    ]
    if wavelengths is not None:
        lines.append("wavelengths=" + ",".join(repr(float(w)) for w in wavelengths))
    return "\n".join(lines) + "\n"


def read_cube(path):
    """Read a cube written by :func:`write_cube`.

    Raises ``FileNotFoundError`` if either file is missing and
    :class:`CubeFormatError` on a malformed header, a payload whose size does
    not match the header, or non-finite values.
    """
    header_path, payload_path = cube_paths(path)
    for p in (header_path, payload_path):
        if not p.is_file():
            raise FileNotFoundError(f"cube file not found: {p}")
    rows, cols, bands, wavelengths = _parse_header(header_path.read_text(), header_path)

    payload = payload_path.read_bytes()
    expected = rows * cols * bands * PAYLOAD_DTYPE.itemsize
    if len(payload) != expected:
        raise CubeFormatError(
            f"{payload_path}: payload size mismatch: header declares {rows}x{cols}x{bands} "
            f"({expected} bytes), payload has {len(payload)} bytes"
        )
    data = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape(rows, cols, bands)
    if not np.all(np.isfinite(data)):
        pixel, band = _first_nonfinite(data)
        raise CubeFormatError(f"{payload_path}: non-finite value at pixel {pixel}, band {band}")
    try:
        return HyperCube(data.astype(np.float32), wavelengths)
    except ValueError as exc:
        raise CubeFormatError(f"{header_path}: {exc}") from None


def write_cube(cube, path):
    """Write ``cube`` so that :func:`read_cube` returns it bit for bit."""
    header_path, payload_path = cube_paths(path)
    header_path.write_text(_format_header(cube.rows, cube.cols, cube.bands, cube.wavelengths))
    payload_path.write_bytes(np.ascontiguousarray(cube.data, dtype=PAYLOAD_DTYPE).tobytes())


# -- spectral libraries ----------------------------------------------------------


def _parse_wavelength_labels(labels):
    try:
        wl = np.array([float(v) for v in labels])
    except ValueError:
        return None
    if wl.size > 1 and not np.all(np.diff(wl) > 0):
        return None
    return wl


def read_spectral_library(path):
    """Read a comma-delimited library: a header row, then ``name,v0,v1,...`` rows.

    When every header label after the first parses as a number and the
    labels increase, they are kept as the library's wavelengths.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"library file not found: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CubeFormatError(f"{path}: empty spectral library")
    header, body = rows[0], rows[1:]
    if not body:
        raise CubeFormatError(f"{path}: spectral library has no spectra")

    width = len(body[0])
    names, spectra = [], []
    for lineno, row in enumerate(body, 2):
        if len(row) != width:
            raise CubeFormatError(
                f"{path}:{lineno}: inconsistent spectrum length "
                f"({len(row) - 1} values, expected {width - 1})"
            )
        try:
            values = [float(c) for c in row[1:]]
        except ValueError:
            raise CubeFormatError(f"{path}:{lineno}: non-numeric cell in spectrum {row[0]!r}") from None
        names.append(row[0].strip())
        spectra.append(values)
    if width < 2:
        raise CubeFormatError(f"{path}: spectra have no values")

    wavelengths = None
    if len(header) == width:
        wavelengths = _parse_wavelength_labels(header[1:])
    try:
        return SpectralLibrary(tuple(names), np.array(spectra), wavelengths)
    except ValueError as exc:
        raise CubeFormatError(f"{path}: {exc}") from None


def write_spectral_library(library, path):
    """Write ``library`` as CSV; values use shortest round-trip float text."""
    if library.wavelengths is not None:
        labels = [repr(float(w)) for w in library.wavelengths]
    else:
        labels = [f"b{j}" for j in range(library.n_bands)]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", *labels])
        for name, spectrum in zip(library.names, library.spectra):
            writer.writerow([name, *(repr(float(v)) for v in spectrum)])


# -- abundance maps -----------------------------------------------------------------


def _class_stem(directory, index, classes):
    width = max(2, len(str(classes - 1)))
    return Path(directory) / f"class_{index:0{width}d}"


def write_abundance_maps(abundance, directory):
    """Write one single-band grid file per class plus a plain-text manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [f"rows={abundance.rows}", f"cols={abundance.cols}", f"classes={abundance.classes}"]
    for j in range(abundance.classes):
        stem = _class_stem(directory, j, abundance.classes)
        write_cube(HyperCube(abundance.data[:, :, j : j + 1]), stem)
        lines.append(f"class={j},{abundance.class_names[j]},{stem.name}")
    (directory / ABUNDANCE_MANIFEST).write_text("\n".join(lines) + "\n")


def read_abundance_maps(directory):
    directory = Path(directory)
    manifest = directory / ABUNDANCE_MANIFEST
    if not manifest.is_file():
        raise FileNotFoundError(f"abundance manifest not found: {manifest}")
    names, grids = [], []
    for line in manifest.read_text().splitlines():
        key, _, value = line.partition("=")
        if key == "class":
            _, name, stem = value.split(",", 2)
            grids.append(read_cube(directory / stem).data[:, :, 0])
            names.append(name)
    if not grids:
        raise CubeFormatError(f"{manifest}: lists no classes")
    return AbundanceCube(np.stack(grids, axis=2), tuple(names))


# -- quick-look images -----------------------------------------------------------------


def write_pgm(path, image):
    """Write a 2-D array as 8-bit binary PGM, min-max scaled.

    Returns the ``(low, high)`` values mapped to 0 and 255. A constant image
    is written as all zeros.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {image.shape}")
    low, high = float(image.min()), float(image.max())
    if high > low:
        scaled = np.rint((image - low) / (high - low) * 255.0)
    else:
        scaled = np.zeros_like(image)
    pixels = scaled.astype(np.uint8)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())
    return low, high


def read_pgm(path):
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5" or len(parts) < 5:
        raise CubeFormatError(f"{path}: not a binary PGM file")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise CubeFormatError(f"{path}: only 8-bit PGM supported")
    body = raw[len(raw) - width * height :]
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width)

