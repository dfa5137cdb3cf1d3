from mdhr_lib.libs.data.sequences import pad_video, clip_sampler, clip_window, make_combo_targets, make_batch, \
    SequenceBatch, ClipSpan
from mdhr_lib.libs.data.storage import read_sequence, write_sequence, read_labels, read_trajectory, VideoRecord
from mdhr_lib.libs.data.synth import SynthSpec, BlobSpec, synth_generate, labels_from_trajectory, load_spec
from mdhr_lib.libs.data.loader import SequenceDataset, open_external_dataset
