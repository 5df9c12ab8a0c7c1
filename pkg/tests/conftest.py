import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import make_marker_claim_corpus, rng_for  # noqa: E402


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.fspath.basename == "test_acceptance.py":
        if report.passed:
            status = "PASS"
        elif report.skipped:
            status = "SKIP (" + str(report.longrepr[2]) + ")"
        else:
            status = "FAIL"
        print(f"\n[acceptance] {item.name}: {status}")


@pytest.fixture(scope="session")
def toy_claim_checkpoint(tmp_path_factory):
    """A small trained claim model: claim iff the sentence contains 'hallmark'."""
    from claimtagger.tagger import TaggerConfig, TrainConfig, train_scratch

    rng = rng_for(101)
    train = make_marker_claim_corpus(24, rng)
    val = make_marker_claim_corpus(8, rng, start_id=200)
    config = TaggerConfig(num_labels=2, embedding_dim=8, word_hidden=8, ff_hidden=8,
                          dropout=0.0, batch_size=8, use_crf=True, seed=11)
    model, log = train_scratch(train, val, config,
                               TrainConfig(lr=0.01, max_epochs=40, seed=11,
                                           early_stop_patience=15))
    assert max(e.val_f1 for e in log) >= 0.95, "toy model failed to train"
    path = tmp_path_factory.mktemp("ckpt") / "toy_claim.ckpt"
    model.save(path)
    return path
