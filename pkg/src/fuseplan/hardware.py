"""Hardware template: buffer capacities and mode, PE geometry, bandwidth,
energy table, and the candidate capacity grids used for co-exploration."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

KB = 1024

# Access-energy defaults below are placeholders (NON-PAPER): the curve shape
# (larger SRAM costs more per access) is what matters to the model; only the
# DRAM energy constant is an anchored value.
DEFAULT_SRAM_CURVE = (
    # (capacity upper bound in bytes, read pJ/byte, write pJ/byte)
    (256 * KB, 0.6, 0.8),
    (512 * KB, 0.8, 1.0),
    (1024 * KB, 1.1, 1.4),
    (2048 * KB, 1.5, 1.9),
    (4096 * KB, 2.0, 2.5),
)


@dataclass(frozen=True)
class EnergyTable:
    dram_pj_per_bit: float = 12.5
    mac_pj: float = 0.05            # NON-PAPER placeholder
    hop_pj_per_byte: float = 2.0    # core-to-core crossbar, NON-PAPER placeholder
    sram_curve: tuple = DEFAULT_SRAM_CURVE

    def __post_init__(self):
        if self.dram_pj_per_bit < 0 or self.mac_pj < 0 or self.hop_pj_per_byte < 0:
            raise ValueError("energies must be >= 0")

    def sram_read_pj(self, capacity_bytes: int) -> float:
        return self._lookup(capacity_bytes)[0]

    def sram_write_pj(self, capacity_bytes: int) -> float:
        return self._lookup(capacity_bytes)[1]

    def _lookup(self, capacity_bytes):
        for bound, rd, wr in self.sram_curve:
            if capacity_bytes <= bound:
                return rd, wr
        return self.sram_curve[-1][1], self.sram_curve[-1][2]

    def scaled(self, factor: float) -> "EnergyTable":
        return EnergyTable(
            dram_pj_per_bit=self.dram_pj_per_bit * factor,
            mac_pj=self.mac_pj * factor,
            hop_pj_per_byte=self.hop_pj_per_byte * factor,
            sram_curve=tuple((b, r * factor, w * factor) for b, r, w in self.sram_curve),
        )


@dataclass(frozen=True)
class HardwareConfig:
    """One concrete accelerator configuration.

    ``buffer_mode`` is "separate" (global buffer for activations plus a
    weight buffer) or "shared" (one buffer holds both).  ``region_limit`` is
    the buffer region manager's node budget per subgraph.
    """

    buffer_mode: str = "separate"
    global_buf_bytes: int = 1024 * KB
    weight_buf_bytes: int = 1152 * KB
    shared_buf_bytes: int = 0
    region_limit: int = 64
    pe_rows: int = 4
    pe_cols: int = 4
    macs_per_pe: int = 64
    freq_hz: float = 1e9
    dram_bw_bytes_per_s: float = 16e9
    hop_bw_bytes_per_s: float = 64e9
    util_threshold: float = 0.75
    lcm_cap: int = 4096
    buffer_word_bytes: int = 8
    weight_prefetch: bool = True
    energy: EnergyTable = field(default_factory=EnergyTable)

    def __post_init__(self):
        if self.buffer_mode not in ("separate", "shared"):
            raise ValueError(f"unknown buffer_mode {self.buffer_mode!r}")
        if self.buffer_mode == "shared" and self.shared_buf_bytes <= 0:
            raise ValueError("shared mode needs shared_buf_bytes > 0")

    @property
    def peak_macs_per_cycle(self) -> int:
        return self.pe_rows * self.pe_cols * self.macs_per_pe

    @property
    def buf_total_bytes(self) -> int:
        """Total on-chip buffer capacity; the size term of the co-design objective."""
        if self.buffer_mode == "shared":
            return self.shared_buf_bytes
        return self.global_buf_bytes + self.weight_buf_bytes

    @property
    def dram_bytes_per_cycle(self) -> float:
        return self.dram_bw_bytes_per_s / self.freq_hz

    def activation_capacity(self, resident_weight_bytes: int = 0) -> int:
        if self.buffer_mode == "shared":
            return self.shared_buf_bytes - resident_weight_bytes
        return self.global_buf_bytes

    def with_sizes(self, global_bytes=None, weight_bytes=None, shared_bytes=None) -> "HardwareConfig":
        kw = {}
        if global_bytes is not None:
            kw["global_buf_bytes"] = int(global_bytes)
        if weight_bytes is not None:
            kw["weight_buf_bytes"] = int(weight_bytes)
        if shared_bytes is not None:
            kw["shared_buf_bytes"] = int(shared_bytes)
        return replace(self, **kw)


@dataclass(frozen=True)
class CapacityGrid:
    """Evenly spaced candidate capacities, inclusive of both ends."""

    lo: int
    hi: int
    step: int

    def __post_init__(self):
        if self.lo <= 0 or self.step <= 0 or (self.hi - self.lo) % self.step:
            raise ValueError("grid must be lo + k*step == hi for integer k >= 0")

    def __len__(self):
        return (self.hi - self.lo) // self.step + 1

    def __getitem__(self, idx: int) -> int:
        if not 0 <= idx < len(self):
            raise IndexError(idx)
        return self.lo + idx * self.step

    def values(self):
        return [self[i] for i in range(len(self))]

    def nearest_index(self, value: float) -> int:
        """Grid index closest to ``value``; exact midpoints round up."""
        if value <= self.lo:
            return 0
        if value >= self.hi:
            return len(self) - 1
        q, r = divmod(value - self.lo, self.step)
        idx = int(q) + (1 if r * 2 >= self.step else 0)
        return min(idx, len(self) - 1)


# §-anchored exploration ranges: global 128..2048 KB step 64, weight
# 144..2304 KB step 72, shared 128..3072 KB step 64.
GLOBAL_GRID = CapacityGrid(128 * KB, 2048 * KB, 64 * KB)
WEIGHT_GRID = CapacityGrid(144 * KB, 2304 * KB, 72 * KB)
SHARED_GRID = CapacityGrid(128 * KB, 3072 * KB, 64 * KB)


@dataclass(frozen=True)
class HardwareSpace:
    """Candidate buffer capacities around a base config.

    A genome's hardware choice is an index tuple: (global, weight) indices in
    separate mode, a single shared index otherwise.
    """

    base: HardwareConfig = field(default_factory=HardwareConfig)
    global_grid: CapacityGrid = GLOBAL_GRID
    weight_grid: CapacityGrid = WEIGHT_GRID
    shared_grid: CapacityGrid = SHARED_GRID

    @property
    def mode(self) -> str:
        return self.base.buffer_mode

    def choice_dims(self) -> tuple:
        if self.mode == "shared":
            return (len(self.shared_grid),)
        return (len(self.global_grid), len(self.weight_grid))

    def config_for(self, choice: tuple) -> HardwareConfig:
        if self.mode == "shared":
            return self.base.with_sizes(shared_bytes=self.shared_grid[choice[0]])
        return self.base.with_sizes(global_bytes=self.global_grid[choice[0]],
                                    weight_bytes=self.weight_grid[choice[1]])

    def grids(self) -> tuple:
        if self.mode == "shared":
            return (self.shared_grid,)
        return (self.global_grid, self.weight_grid)

    def random_choice(self, rng) -> tuple:
        return tuple(rng.randrange(d) for d in self.choice_dims())

    def mean_choice(self, a: tuple, b: tuple) -> tuple:
        """Average two choices by capacity value, rounding to the grid."""
        grids = self.grids()
        return tuple(grids[k].nearest_index((grids[k][a[k]] + grids[k][b[k]]) / 2)
                     for k in range(len(grids)))

    def fixed_space(self, choice: tuple) -> "HardwareSpace":
        """Degenerate space pinned to one candidate (for fixed-HW rows)."""
        cfg = self.config_for(choice)
        if self.mode == "shared":
            g = CapacityGrid(cfg.shared_buf_bytes, cfg.shared_buf_bytes, 1)
            return HardwareSpace(base=cfg, shared_grid=g,
                                 global_grid=self.global_grid, weight_grid=self.weight_grid)
        gg = CapacityGrid(cfg.global_buf_bytes, cfg.global_buf_bytes, 1)
        wg = CapacityGrid(cfg.weight_buf_bytes, cfg.weight_buf_bytes, 1)
        return HardwareSpace(base=cfg, global_grid=gg, weight_grid=wg,
                             shared_grid=self.shared_grid)


# Fixed-HW preset rows: separate (global, weight) and shared sizes in KB.
FIXED_PRESETS_SEPARATE = {"S": (512, 576), "M": (1024, 1152), "L": (2048, 2304)}
FIXED_PRESETS_SHARED = {"S": 576, "M": 1152, "L": 2304}


def preset_config(base: HardwareConfig, name: str) -> HardwareConfig:
    if base.buffer_mode == "shared":
        return base.with_sizes(shared_bytes=FIXED_PRESETS_SHARED[name] * KB)
    gkb, wkb = FIXED_PRESETS_SEPARATE[name]
    return base.with_sizes(global_bytes=gkb * KB, weight_bytes=wkb * KB)
