"""Simulated users: random ownership of polar words and sentence assignment."""
import json
from dataclasses import dataclass, field

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class WordOwnership:
    owner: dict
    n_users: int

    def __post_init__(self):
        bad = [w for w, u in self.owner.items() if not 0 <= u < self.n_users]
        if bad:
            raise ValueError(f"owner index out of range for {bad[:5]}")

    def owners_of(self, tokens):
        """Sorted distinct owners of the polar words present in ``tokens``."""
        owner = self.owner
        return sorted({owner[t] for t in set(tokens) if t in owner})

    def words_of(self, user):
        return {w for w, u in self.owner.items() if u == user}


@dataclass
class UserShard:
    user: int
    train: list = field(default_factory=list)
    dev: list = field(default_factory=list)
    test: list = field(default_factory=list)
    pure_test: list = field(default_factory=list)

    def split(self, name):
        return getattr(self, name)


def assign_words(lexicon, n_users, rng, mode="iid"):
    """Give each lexicon word to one user.

    ``iid``: every word independently uniform.  ``balanced``: shuffled, then
    dealt round-robin so group sizes differ by at most one.
    """
    if n_users < 1:
        raise ValueError(f"n_users must be >= 1, got {n_users}")
    words = list(lexicon.words)
    if mode == "iid":
        owner = {w: rng.next_below(n_users) for w in words}
    elif mode == "balanced":
        owner = {w: i % n_users for i, w in enumerate(rng.shuffle(words))}
    else:
        raise ValueError(f"unknown word partition mode {mode!r}")
    return WordOwnership(owner, n_users)


def pure_user_test(shard, ownership, require_owned=False):
    """Test sentences of ``shard`` that contain no polar word owned by another user."""
    out = []
    for s in shard.test:
        owners = ownership.owners_of(s.tokens)
        if any(u != shard.user for u in owners):
            continue
        if require_owned and not owners:
            continue
        out.append(s)
    return out


def assign_sentences(corpus, ownership, rng, require_owned=False):
    """Route each sentence of each split to one user.

    One owner among the sentence's polar words wins outright; several owners
    are a uniform draw among them; no polar words is a uniform draw among all.
    """
    n = ownership.n_users
    shards = [UserShard(u) for u in range(n)]
    for name in SPLITS:
        split_rng = rng.split(name)
        for s in corpus.split(name):
            owners = ownership.owners_of(s.tokens)
            if len(owners) == 1:
                u = owners[0]
            elif owners:
                u = owners[split_rng.next_below(len(owners))]
            else:
                u = split_rng.next_below(n)
            shards[u].split(name).append(s)
    for shard in shards:
        shard.pure_test = pure_user_test(shard, ownership, require_owned)
    return shards


def shards_to_manifest(shards, ownership=None):
    """JSON-ready sentence ids per user per split."""
    doc = {
        "version": 1,
        "users": [
            {"user": sh.user, **{name: [s.id for s in sh.split(name)]
                                 for name in SPLITS + ("pure_test",)}}
            for sh in shards
        ],
    }
    if ownership is not None:
        doc["n_users"] = ownership.n_users
        doc["ownership"] = {w: ownership.owner[w] for w in sorted(ownership.owner)}
    return doc


def shards_from_manifest(corpus, doc):
    by_id = {name: {s.id: s for s in corpus.split(name)} for name in SPLITS}
    by_id["pure_test"] = by_id["test"]
    shards = []
    for entry in doc["users"]:
        sh = UserShard(entry["user"])
        for name in SPLITS + ("pure_test",):
            setattr(sh, name, [by_id[name][i] for i in entry[name]])
        shards.append(sh)
    return shards


def write_manifest(path, shards, ownership=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(shards_to_manifest(shards, ownership), fh, indent=1, sort_keys=True)
        fh.write("\n")
