# %% [markdown]
# # Dew point and relative humidity
#
# Humidity is filtered as dew point, which varies smoothly, and reported as
# relative humidity. The conversion is a Magnus-type ratio of saturation
# vapour pressures.

# %%
import numpy as np

from sensorqc import dew_point_to_rh, rh_to_dew_point

print("RH(td=10, ta=20) =", round(float(dew_point_to_rh(10.0, 20.0)), 3))
print("RH(td=ta=-5)     =", dew_point_to_rh(-5.0, -5.0))
print("RH(td=25, ta=20) =", dew_point_to_rh(25.0, 20.0), "(clamped)")

# %%
ta = np.linspace(-20, 40, 7)
for rh in (20, 50, 90):
    td = rh_to_dew_point(rh, ta)
    print(f"RH {rh:2d}%: dew points", np.round(td, 2), "roundtrip error",
          f"{np.abs(dew_point_to_rh(td, ta) - rh).max():.1e}")
