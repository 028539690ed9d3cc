import os

import numpy as np
import pytest

from utils.exceptions import ConfigError, DataFileError
from utils.har import HAR_NUM_FEATURES, HarTask, load_har, make_task

HAR_TRAIN_DIR = os.environ.get("HAR_TRAIN_DIR", "")

def _write_har(tmp_path, labels, values=None):
    rng = np.random.default_rng(0)
    if values is None:
        values = rng.normal(size=(len(labels), HAR_NUM_FEATURES))
    features = tmp_path / "X_train.txt"
    features.write_text(
        "\n".join("  " + " ".join(f"{v:.7e}" for v in row) for row in values) + "\n", encoding="utf-8"
    )
    label_file = tmp_path / "y_train.txt"
    label_file.write_text("\n".join(str(l) for l in labels) + "\n", encoding="utf-8")
    return str(features), str(label_file), values

class TestHarTask:
    def test_presets(self):
        moving = make_task("moving", "mean-acc")
        assert moving.feature_indices == (1, 2, 3)
        assert moving.positive_labels == {1, 2, 3}
        assert moving.negative_labels == {4, 5, 6}
        updown = make_task("updown", "mean-freq-acc")
        assert updown.feature_indices == (294, 295, 296)
        assert updown.positive_labels == {2} and updown.negative_labels == {3}

    def test_overlapping_labels_rejected(self):
        with pytest.raises(ConfigError):
            HarTask(feature_indices=(1,), positive_labels=frozenset({1, 2}), negative_labels=frozenset({2}))

    def test_unknown_task(self):
        with pytest.raises(ConfigError):
            make_task("running")

class TestLoadHar:
    def test_class_assignment_and_columns(self, tmp_path):
        labels = [1, 4, 2, 5, 3, 6, 6]
        features, label_file, values = _write_har(tmp_path, labels)
        task = make_task("custom", "custom", positive=[1, 2, 3], negative=[4, 5, 6], feature_indices=[3, 1])
        dataset, report = load_har(features, label_file, task)
        assert (dataset.m, dataset.n, dataset.dim) == (4, 3, 2)
        assert np.allclose(dataset.class1[0], [values[0, 2], values[0, 0]], rtol=1e-6)
        assert report.rows_dropped == 0
        assert report.label_counts[6] == 2

    def test_dropped_rows_counted(self, tmp_path):
        features, label_file, _ = _write_har(tmp_path, [1, 2, 3, 4, 2, 3])
        dataset, report = load_har(features, label_file, make_task("updown"))
        assert (dataset.m, dataset.n) == (2, 2)
        assert report.rows_dropped == 2

    def test_row_count_mismatch(self, tmp_path):
        features, label_file, _ = _write_har(tmp_path, [1, 4, 2])
        with open(label_file, "a", encoding="utf-8") as f:
            f.write("5\n")
        with pytest.raises(DataFileError, match="Число строк"):
            load_har(features, label_file, make_task("moving"))

    def test_non_numeric_token_names_row_and_column(self, tmp_path):
        values = np.ones((3, HAR_NUM_FEATURES))
        features, label_file, _ = _write_har(tmp_path, [1, 4, 2], values)
        lines = open(features, encoding="utf-8").read().splitlines()
        tokens = lines[1].split()
        tokens[4] = "abc"
        lines[1] = " ".join(tokens)
        with open(features, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
        with pytest.raises(DataFileError, match="строке 2, столбце 5"):
            load_har(features, label_file, make_task("moving"))

    def test_feature_index_out_of_range(self, tmp_path):
        features, label_file, _ = _write_har(tmp_path, [1, 4])
        task = make_task("moving", "custom", feature_indices=[1, 562])
        with pytest.raises(DataFileError, match="562"):
            load_har(features, label_file, task)

    def test_missing_class_is_error(self, tmp_path):
        features, label_file, _ = _write_har(tmp_path, [1, 1, 4])
        with pytest.raises(DataFileError):
            load_har(features, label_file, make_task("updown"))

    @pytest.mark.skipif(not HAR_TRAIN_DIR, reason="задайте HAR_TRAIN_DIR с X_train.txt и y_train.txt")
    def test_uci_training_split_sizes(self):
        features = os.path.join(HAR_TRAIN_DIR, "X_train.txt")
        labels = os.path.join(HAR_TRAIN_DIR, "y_train.txt")
        moving, report = load_har(features, labels, make_task("moving", "mean-acc"))
        assert (moving.m, moving.n, moving.dim) == (4067, 3285, 3)
        assert report.label_counts == {1: 1226, 2: 1073, 3: 986, 4: 1286, 5: 1374, 6: 1407}
        updown, _ = load_har(features, labels, make_task("updown", "mean-acc"))
        assert (updown.n, updown.m) == (1073, 986)
