"""
Детерминированное получение генераторов случайных чисел.

Вся случайность запуска выводится из одного корневого seed. Производные
seed строятся по счётчикам (номер точки сетки, класс, номер прогона) через
numpy.random.SeedSequence, поэтому результат не зависит от порядка
выполнения и числа потоков.
"""
import numpy as np

def seed_sequence(seed: int, *keys: int) -> np.random.SeedSequence:
    """Последовательность seed для корня seed и счётчиков keys."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))

def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Генератор для корня seed и счётчиков keys.

    Без счётчиков результат совпадает с np.random.default_rng(seed).
    """
    if not keys:
        return np.random.default_rng(int(seed))
    return np.random.default_rng(seed_sequence(seed, *keys))

def derive_seed(seed: int, *keys: int) -> int:
    """Целочисленный производный seed (63 бита) для вложенных процедур."""
    state = seed_sequence(seed, *keys).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))
