# Copyright (c) 2026 The nvbench Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

from __future__ import absolute_import


class NvbenchError(Exception):
    """Base class of every error raised by nvbench."""


class DataFormatError(NvbenchError):
    """A byte container could not be decoded."""


class MalformedFileError(DataFormatError):
    """Raw recording framing is broken, e.g. a truncated 5-byte record."""


class UnsupportedFormatError(DataFormatError):
    """Container version or event type this package does not read."""


class BadMagicError(DataFormatError):
    pass


class VersionMismatchError(DataFormatError):
    pass


class TruncationError(DataFormatError):
    """Payload shorter than its header promises."""


class GeometryError(NvbenchError):
    """An event lies outside the sensor geometry."""


class LabelFileError(NvbenchError):
    """Trial label windows are reversed, overlapping or unreadable."""


class ChecksumError(NvbenchError):
    pass


class ShapeMismatchError(NvbenchError, ValueError):
    pass


class TapeError(NvbenchError):
    """Backward pass needs a forward cache that was never recorded."""


class ConfigError(NvbenchError, ValueError):
    pass


class CheckpointError(NvbenchError):
    pass


class FeatureMapError(NvbenchError):
    """Feature maps requested from a layer without spatial maps."""


class ManifestError(NvbenchError):
    """A run manifest is missing, unreadable or would be overwritten."""
