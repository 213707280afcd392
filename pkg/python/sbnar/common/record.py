"""Contains the `Record` class, the on-disk form of every sbnar artifact that
isn't a dataset."""

import copy
import json
import os

import cbor

from sbnar.common.error import DataError

def _check_json(ob):
    try:
        cbor.dumps(ob)
    except Exception:
        raise TypeError("Invalid JSON/CBOR object: {!r}".format(ob))
    if isinstance(ob, float) or ob is None or isinstance(ob, (bool, int, str)):
        return
    if isinstance(ob, dict):
        for key, value in ob.items():
            if not isinstance(key, str):
                raise TypeError("Record keys must be strings, not {!r}".format(key))
            _check_json(value)
    elif isinstance(ob, (list, tuple)):
        for value in ob:
            _check_json(value)
    else:
        raise TypeError("Invalid JSON/CBOR object: {!r}".format(ob))

def complex_to_json(values):
    """Converts a (nested) sequence of complex numbers into nested lists of
    `[re, im]` pairs."""
    if hasattr(values, 'tolist'):
        values = values.tolist()
    if isinstance(values, (list, tuple)):
        return [complex_to_json(value) for value in values]
    value = complex(values)
    return [value.real, value.imag]

def complex_from_json(values):
    """Inverse of `complex_to_json()`; returns nested lists of Python complex
    numbers."""
    if (isinstance(values, list) and len(values) == 2
            and all(isinstance(x, (int, float)) for x in values)):
        return complex(values[0], values[1])
    return [complex_from_json(value) for value in values]

class Record(object):
    """Represents a JSON-like document with a kind tag.

    Records are used for fitted models, fit reports, validation reports, and
    run manifests. They behave like a dict holding the toplevel JSON object
    entries; values must be serializable by the cbor library and, since
    records are also written as JSON, consist only of dicts with string keys,
    lists, strings, numbers, booleans, and None.

    Floats survive both the JSON and the CBOR encoding exactly.
    """

    def __init__(self, *args, **kwargs):
        """Constructs a Record object.

        The first positional argument, if any, is the record kind (a short
        string such as `"nar-model"`); the keyword arguments form the JSON
        data. For instance:

            Record('fit-report', K=8, sigma_g=[0.1, 0.2])

        You can also pass a `Record` object as the sole argument, in which case
        a copy will be made.
        """
        super().__init__()
        if len(args) == 1 and not kwargs and isinstance(args[0], Record):
            self._kind = args[0]._kind
            self._json = copy.deepcopy(args[0]._json)
        else:
            if len(args) > 1:
                raise TypeError("Record takes at most one positional argument")
            self._kind = str(args[0]) if args else None
            _check_json(kwargs)
            self._json = kwargs

    @property
    def kind(self): #@
        """The record kind, or None if unset."""
        return self._kind

    def __bool__(self):
        """Returns whether there is any data in this record."""
        return bool(self._json)

    def __len__(self):
        """Returns the number of toplevel entries."""
        return len(self._json)

    def __getitem__(self, key):
        return self._json[key]

    def __setitem__(self, key, value):
        if not isinstance(key, str):
            raise TypeError("Record keys must be strings")
        _check_json(value)
        self._json[key] = value

    def __delitem__(self, key):
        del self._json[key]

    def __contains__(self, key):
        return key in self._json

    def __iter__(self):
        return iter(self._json)

    def get(self, key, default=None):
        """Returns the entry for key, or default if it doesn't exist."""
        return self._json.get(key, default)

    def keys(self):
        """Iterates over the JSON object entry keys."""
        return self._json.keys()

    def values(self):
        """Iterates over the JSON object values."""
        return self._json.values()

    def items(self):
        """Iterates over the JSON object items."""
        return self._json.items()

    def update(self, **kwargs):
        """Adds or replaces entries."""
        for key, value in kwargs.items():
            self[key] = value

    def __eq__(self, other):
        if isinstance(other, Record):
            return self._kind == other._kind and self._json == other._json
        return False

    def to_object(self):
        """Returns the record as a plain dict, with the kind stored under the
        `"kind"` key."""
        ob = {'kind': self._kind}
        ob.update(copy.deepcopy(self._json))
        return ob

    @classmethod
    def from_object(cls, ob):
        """Inverse of `to_object()`."""
        if not isinstance(ob, dict):
            raise DataError("record must be a JSON object, not {}".format(type(ob).__name__))
        ob = dict(ob)
        kind = ob.pop('kind', None)
        try:
            return Record(kind, **ob) if kind is not None else Record(**ob)
        except TypeError as e:
            raise DataError(str(e))

    def to_json(self):
        """Serializes to a JSON string with sorted keys."""
        return json.dumps(self.to_object(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text):
        try:
            ob = json.loads(text)
        except ValueError as e:
            raise DataError("invalid JSON record: {}".format(e))
        return cls.from_object(ob)

    def to_cbor(self):
        """Serializes to CBOR bytes."""
        return cbor.dumps(self.to_object(), sort_keys=True)

    @classmethod
    def from_cbor(cls, data):
        try:
            ob = cbor.loads(data)
        except Exception as e:
            raise DataError("invalid CBOR record: {}".format(e))
        return cls.from_object(ob)

    def save(self, path):
        """Writes the record to path. Files ending in `.cbor` are written as
        CBOR, anything else as JSON."""
        path = str(path)
        if os.path.splitext(path)[1] == '.cbor':
            with open(path, 'wb') as f:
                f.write(self.to_cbor())
        else:
            with open(path, 'w', encoding='utf-8') as f:
                f.write(self.to_json())
                f.write('\n')

    @classmethod
    def load(cls, path):
        """Reads a record written by `save()`."""
        path = str(path)
        if os.path.splitext(path)[1] == '.cbor':
            with open(path, 'rb') as f:
                return cls.from_cbor(f.read())
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_json(f.read())

    def __repr__(self):
        e = []
        if self._kind is not None:
            e.append(repr(self._kind))
        for key, value in sorted(self._json.items()):
            e.append("{!s}={!r}".format(key, value))
        return "Record({})".format(', '.join(e))

    __str__ = __repr__
