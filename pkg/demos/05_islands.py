"""
Islands of perpendicular magnetization around the zeros of a slow field.

With h_i = h sin(2 pi i / N) the local field is weak only near its zeros,
where a region of perpendicular order survives.  Stronger amplitudes make
the field pass through the ordered window faster, so islands shrink.
"""

import math

from xychain import Sinusoidal, SpinChainModel, TruncationPolicy, ground_state_search
from xychain.analysis import detect_islands, kz_predictions, measure_record
from xychain.tebd import EvolutionSchedule

N = 128
schedule = EvolutionSchedule(((0.2, 1500, 1e-8), (0.05, 1000, 1e-9)))
kz = kz_predictions(0.57, 0.14)
print(f"predicted exponents: size {-kz.predicted_size_exponent:.3f}, "
      f"amplitude {kz.predicted_amplitude_exponent:.3f}")
for h in (2.0, 8.0):
    model = SpinChainModel.from_spec(Sinusoidal(h, 2 * math.pi / N), N)
    state, diag = ground_state_search(model, schedule, TruncationPolicy(max_bond=32))
    record = measure_record(state, model, 3, energy=diag.final_energy)
    for isl in detect_islands(record):
        print(f"h = {h:4.1f}: island at site {isl.center_index}, {isl.size} sites, "
              f"peak |m_perp| {isl.amplitude:.3f}")
