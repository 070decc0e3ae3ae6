import json

import pytest

from minewatch import io as mwio
from minewatch.cartel import CartelNetwork, CartelNode, PairWindowResult
from minewatch.detect import (
    BlockRecord,
    MinerWindowResult,
    PowerBucketStat,
    Window,
)


class TestParseBlocks:
    def test_small_csv(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("height,timestamp,miner\n1,100,a\n2,200,b\n3,300,a\n")
        records = mwio.parse_blocks(path)
        assert len(records) == 3
        assert records[0] == BlockRecord(height=1, timestamp=100, miner="a", address="a")

    def test_jsonl_pool_precedence(self, tmp_path):
        path = tmp_path / "b.jsonl"
        rows = [
            {"height": 1, "timestamp": 100, "miner": "addr1", "pool": "PoolX"},
            {"height": 2, "timestamp": 200, "miner": "addr2"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        records = mwio.parse_blocks(path)
        assert records[0].miner == "PoolX"
        assert records[0].pool == "PoolX"
        assert records[0].address == "addr1"
        assert records[1].miner == "addr2"
        assert records[1].pool is None

    def test_decreasing_height_rejected_with_line(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("height,timestamp,miner\n5,100,a\n3,200,b\n")
        with pytest.raises(ValueError, match="line 3"):
            mwio.parse_blocks(path)

    def test_duplicate_height_rejected(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("height,timestamp,miner\n5,100,a\n5,200,b\n")
        with pytest.raises(ValueError, match="duplicate height 5"):
            mwio.parse_blocks(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("height,miner\n1,a\n")
        with pytest.raises(ValueError, match="header"):
            mwio.parse_blocks(path)

    def test_bad_format_name(self, tmp_path):
        with pytest.raises(ValueError, match="format"):
            mwio.parse_blocks(tmp_path / "b.csv", fmt="parquet")

    def test_round_trip_csv_and_jsonl(self, tmp_path, fixtures_dir):
        records = mwio.parse_blocks(fixtures_dir / "namedpool_blocks.csv")
        for name in ("copy.csv", "copy.jsonl"):
            out = tmp_path / name
            mwio.write_blocks(records, out)
            assert mwio.parse_blocks(out) == records

    def test_round_trip_quoted_labels(self, tmp_path):
        records = [
            BlockRecord(height=1, timestamp=10, miner='pool, "quoted"', address='pool, "quoted"'),
            BlockRecord(height=2, timestamp=20, miner="plain", address="plain"),
        ]
        out = tmp_path / "q.csv"
        mwio.write_blocks(records, out)
        assert mwio.parse_blocks(out) == records


class TestParseTransactions:
    def test_jsonl_fixture(self, fixtures_dir):
        txs = mwio.parse_transactions(fixtures_dir / "cluster_txs.jsonl")
        assert len(txs) == 6
        assert txs[0].inputs == (("addr-u1", 300), ("addr-a1", 200))
        assert txs[3].spent_by == ("tx5", None)

    def test_csv_round_understanding(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text(
            "id,is_coinbase,inputs,outputs,spent_by\n"
            "t1,false,a:10;b:20,c:25,\n"
            "t2,true,,d:50,t3\n"
        )
        txs = mwio.parse_transactions(path)
        assert txs[0].inputs == (("a", 10), ("b", 20))
        assert txs[0].outputs == (("c", 25),)
        assert txs[0].spent_by is None
        assert txs[1].is_coinbase
        assert txs[1].spent_by == ("t3",)

    def test_malformed_entry_names_line(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("id,is_coinbase,inputs,outputs\nt1,false,oops,c:25\n")
        with pytest.raises(ValueError, match="line 2"):
            mwio.parse_transactions(path)


def small_store():
    window = Window(id=0, coin="sim", span="2014-01", sequence=("a", "a", "b"))
    result = MinerWindowResult(miner="a", window=0, blocks=2, h_hat=2 / 3, c=1,
                               p=0.8, p_adj=0.9, flagged=True)
    pair = PairWindowResult(a="a", b="b", window=0, c_pair=2, c_cross=1,
                            h_pair=1.0, p=1.0, p_adj=1.0, is_cartel=False)
    network = CartelNetwork(
        nodes=(CartelNode(miner="a", mean_power=0.5, degree=1),),
        edges=(("a", "b", 2),),
    )
    return mwio.ResultStore(
        meta={"coin": "sim", "fdr": 0.05},
        windows=[window],
        miner_results=[result],
        pair_results=[pair],
        network=network,
        clusters={"a": ("a", "x"), "b": ("b",)},
    )


class TestWriteResults:
    def test_empty_store_header_only(self, tmp_path):
        manifest = mwio.write_results(mwio.ResultStore(), tmp_path)
        assert set(manifest["files"]) == set(mwio.RESULT_FILES)
        for name in mwio.RESULT_FILES:
            content = (tmp_path / name).read_text()
            assert len(content.splitlines()) <= 2  # header (or empty dot graph)

    def test_deterministic_rewrite(self, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        m1 = mwio.write_results(small_store(), out1)
        m2 = mwio.write_results(small_store(), out2)
        assert m1 == m2
        for name in list(mwio.RESULT_FILES) + ["manifest.json"]:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_flagged_row_serialized(self, tmp_path):
        mwio.write_results(small_store(), tmp_path)
        text = (tmp_path / "miner_results.csv").read_text()
        assert "0,a,2," in text and ",true" in text

    def test_digest_tracks_content(self, tmp_path):
        m1 = mwio.write_results(small_store(), tmp_path / "a")
        store = small_store()
        store.miner_results[0] = MinerWindowResult(
            miner="a", window=0, blocks=2, h_hat=2 / 3, c=1, p=0.8, p_adj=0.9,
            flagged=False,
        )
        m2 = mwio.write_results(store, tmp_path / "b")
        assert m1["files"]["miner_results.csv"]["sha256"] != m2["files"]["miner_results.csv"]["sha256"]
        assert m1["files"]["windows.csv"]["sha256"] == m2["files"]["windows.csv"]["sha256"]

    def test_clusters_and_network_files(self, tmp_path):
        mwio.write_results(small_store(), tmp_path)
        assert "a,b,2" in (tmp_path / "cartel_edges.csv").read_text()
        clusters = (tmp_path / "clusters.csv").read_text().splitlines()
        assert clusters[0] == "address,cluster_id"
        assert "x,a" in clusters
        assert '"a" -- "b" [weight=2];' in (tmp_path / "cartel.dot").read_text()
