from .bb84 import (
    BasisMode,
    KeyMaterial,
    ProtocolError,
    SiftedKeys,
    SlotRecord,
    alice_prepare,
    bob_measure,
    estimate_qber,
    sift,
)
from .privacy import (
    PrivacyAmplificationError,
    identity_seed,
    output_length,
    privacy_amplify,
    random_seed,
    toeplitz_hash,
)
from .reconciliation import (
    QberAbort,
    ReconciliationError,
    ReconciliationResult,
    default_block_sizes,
    error_correct,
    verification_tag,
)
from .transcript import (
    Abort,
    BasisAnnouncement,
    DetectionReport,
    PaSeed,
    ParityRound,
    QberSample,
    SiftResult,
    Transcript,
    TranscriptError,
    Verification,
    pack_bits,
    replay,
    unpack_bits,
)
