"""
JSON Lines batch files.

The first line is a header {"meta": {...}}; every following line is one
transition {"a": int, "r": float, "s": int, "sp": int}. Keys are sorted and
floats written with their shortest round-trip representation, so the same
batch always produces the same bytes.
"""

import hashlib
import json
import logging
from pathlib import Path

from pydantic import BaseModel, ConfigDict, StrictInt, ValidationError, field_validator

from brpo_lab.exceptions import BatchFormatError
from .models import Batch

logger = logging.getLogger(__name__)


class TransitionSerializer(BaseModel):
    """
    Schema for one transition line.
    """
    model_config = ConfigDict(extra='forbid')

    s: StrictInt
    a: StrictInt
    r: float
    sp: StrictInt

    @field_validator('s', 'a', 'sp')
    @classmethod
    def validate_index(cls, value):
        """Validate that indices are not negative."""
        if value < 0:
            raise ValueError("Indices must be 0 or greater.")
        return value


class BatchHeaderSerializer(BaseModel):
    """
    Schema for the header line.
    """
    model_config = ConfigDict(extra='forbid')

    meta: dict


def _header_line(batch):
    return json.dumps({'meta': batch.meta}, sort_keys=True)


def _transition_line(transition):
    return json.dumps({'s': transition.s, 'a': transition.a, 'r': transition.r, 'sp': transition.sp},
                      sort_keys=True)


def batch_lines(batch):
    """The file content of batch, one string per line."""
    yield _header_line(batch)
    for transition in batch:
        yield _transition_line(transition)


def content_hash(batch):
    """SHA-256 of the serialized batch; equal batches hash equally on every platform."""
    digest = hashlib.sha256()
    for line in batch_lines(batch):
        digest.update(line.encode('utf-8'))
        digest.update(b'\n')
    return digest.hexdigest()


def write_batch(batch, path):
    """Write batch to path as JSON Lines with LF endings."""
    path = Path(path)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        for line in batch_lines(batch):
            handle.write(line)
            handle.write('\n')
    logger.info(f"Wrote {len(batch)} transitions to {path}")
    return path


def _error_message(error):
    first = error.errors()[0]
    location = '.'.join(str(part) for part in first['loc']) or 'line'
    return f"{location}: {first['msg']}"


def read_batch(path):
    """
    Parse a batch file. Raises BatchFormatError naming the first bad line;
    a header count that disagrees with the number of transitions is reported
    at the first missing or surplus line.
    """
    path = Path(path)
    lines = []
    for line_number, raw in enumerate(path.read_bytes().split(b'\n'), start=1):
        try:
            lines.append(raw.decode('utf-8'))
        except UnicodeDecodeError as error:
            raise BatchFormatError(f"invalid UTF-8 at byte {error.start}", line_number=line_number) from error
    if lines and lines[-1] == '':
        lines.pop()
    if not lines:
        raise BatchFormatError("missing header line", line_number=1)

    try:
        header = BatchHeaderSerializer.model_validate_json(lines[0])
    except ValidationError as error:
        raise BatchFormatError(f"invalid header: {_error_message(error)}", line_number=1) from error

    transitions = []
    for line_number, line in enumerate(lines[1:], start=2):
        try:
            item = TransitionSerializer.model_validate_json(line)
        except ValidationError as error:
            raise BatchFormatError(f"invalid transition: {_error_message(error)}", line_number=line_number) from error
        transitions.append((item.s, item.a, item.r, item.sp))

    expected = header.meta.get('n')
    if expected is not None and expected != len(transitions):
        raise BatchFormatError(
            f"header announces {expected} transitions, found {len(transitions)}",
            line_number=min(expected, len(transitions)) + 2,
        )
    batch = Batch.from_transitions(transitions, meta=header.meta)
    if 'n_states' in batch.meta and 'n_actions' in batch.meta:
        batch.check_dimensions(batch.meta['n_states'], batch.meta['n_actions'])
    logger.debug(f"Read {len(batch)} transitions from {path}")
    return batch
