# %% [markdown]
# # Quality control for one station
#
# Calibrate on four weeks of readings, then test each day's minimum
# against its one-step prediction. A few minima get pushed by 4 degrees
# to see what gets flagged.

# %%
import numpy as np

from sensorqc import ModelConfig, calibrate, run_qc

rng = np.random.default_rng(3)
hours = np.arange(24 * 90)
truth = 15 + 5 * np.sin(2 * np.pi * (hours - 9) / 24) + np.cumsum(rng.normal(0, 0.05, hours.size))
station = truth + rng.normal(0, 0.6, hours.size)
forecast = truth + 0.4 + rng.normal(0, 1.2, hours.size)

cfg = ModelConfig(stream_count=2)
T = cfg.calibration_length
cal = calibrate(np.column_stack([station[:T], forecast[:T]]), cfg)
print("noise:", cal.noise)

# %%
rest = np.column_stack([station[T:], forecast[T:]])
days = rest.shape[0] // 24
minima = np.array([24 * d + np.argmin(rest[24 * d:24 * d + 24, 0]) for d in range(days)])
bad = minima[::7]
rest[bad, 0] -= 4.0
mask = np.zeros(rest.shape[0], bool)
mask[minima] = True
qc = run_qc(cal.state, cal.model, rest, cfg, mask)

flagged = set(np.flatnonzero(qc.flagged))
hits = len(flagged & set(bad))
false_alarms = len(flagged - set(bad))
print(f"{len(bad)} perturbed minima, {hits} flagged; {false_alarms} false alarms over {days - len(bad)} clean minima")

# %%
for i in bad[:5]:
    print(f"hour {i:5d}: observed {qc.observed[i]:6.2f}, predicted {qc.predicted_mean[i]:6.2f} "
          f"+/- {qc.predicted_std[i]:.2f}, p = {qc.p_values[i]:.2e}")

# %% [markdown]
# Clean minima are flagged more often than the nominal 10 %. The lowest of
# 24 noisy readings is biased low relative to the model's prediction for
# that hour, so the daily-minimum selector pushes the false-alarm rate up.
# The benchmark's temperature profile shows the same effect.
