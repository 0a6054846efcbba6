"""Tests for output directories and the run index."""

from feed_repl import store


class TestOutputDir:
    def test_override_wins(self, tmp_path):
        target = tmp_path / "explicit"
        assert store.output_dir(target) == target
        assert target.is_dir()

    def test_environment(self, tmp_path):
        assert store.output_dir() == tmp_path / "results"

    def test_cwd_fallback(self, tmp_path, monkeypatch):
        monkeypatch.delenv(store.OUT_DIR_ENV)
        monkeypatch.chdir(tmp_path)
        assert store.output_dir() == tmp_path / "results"

    def test_config_dir_created(self):
        assert store.config_dir().is_dir()


class TestRunIndex:
    def test_set_and_get(self, tmp_path):
        store.set_record(tmp_path, "exp", {"ops": 5})
        record = store.get_record(tmp_path, "exp")
        assert record["ops"] == 5
        assert "updated" in record
        assert store.get_record(tmp_path, "other") is None

    def test_latest_record_replaces(self, tmp_path):
        store.set_record(tmp_path, "exp", {"ops": 5})
        store.set_record(tmp_path, "exp", {"ops": 7})
        assert store.get_record(tmp_path, "exp")["ops"] == 7

    def test_corrupt_index_is_empty(self, tmp_path):
        (tmp_path / store.INDEX_NAME).write_text("{not json")
        assert store.load_index(tmp_path) == {}
