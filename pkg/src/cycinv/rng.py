"""Seedable counter-based random streams (NumPy Philox).

Each consumer of randomness gets its own stream derived from an explicit
seed: parameter init, per-epoch data shuffling, class-code sampling, and
reparameterization noise each advance independently, so adding draws to one
does not perturb the others. Stream state round-trips through plain uint64
arrays for checkpointing.
"""

import numpy as np

STREAM_PURPOSES = ("init", "data", "codes", "reparam")


def stream(seed, *key):
    """Philox generator for `seed`; extra ints select disjoint substreams."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def state_arrays(gen):
    """Capture a generator's full state as named uint64 arrays."""
    st = gen.bit_generator.state
    return {
        "counter": np.ascontiguousarray(st["state"]["counter"], dtype=np.uint64),
        "key": np.ascontiguousarray(st["state"]["key"], dtype=np.uint64),
        "buffer": np.ascontiguousarray(st["buffer"], dtype=np.uint64),
        "misc": np.array(
            [st["buffer_pos"], st["has_uint32"], st["uinteger"]], dtype=np.uint64
        ),
    }


def restore(arrays):
    """Rebuild a generator from :func:`state_arrays` output; continues the
    original draw sequence exactly."""
    bg = np.random.Philox()
    bg.state = {
        "bit_generator": "Philox",
        "state": {
            "counter": np.asarray(arrays["counter"], dtype=np.uint64),
            "key": np.asarray(arrays["key"], dtype=np.uint64),
        },
        "buffer": np.asarray(arrays["buffer"], dtype=np.uint64),
        "buffer_pos": int(arrays["misc"][0]),
        "has_uint32": int(arrays["misc"][1]),
        "uinteger": int(arrays["misc"][2]),
    }
    return np.random.Generator(bg)
