# %% [markdown]
# # CHSH violation versus coincidence window
#
# At 20 MHz the beat period is 50 ns. A short coincidence window sees almost
# no phase spread and violates CHSH. Widening the window averages over the
# beat, and `|S|` drops below 2. A modulation matched to the beat removes most
# of the phase averaging, though accidentals still grow with the window.

# %%
import numpy as np

from biphoton import NO_MODULATION, ModulationSpec, angular_frequency
from biphoton.calibration import REFERENCE_WAVEPACKET, reference_calibration
from biphoton.interference import chsh_vs_window

imp = reference_calibration().imperfections
dw = angular_frequency(20)
windows = np.arange(2.0, 101.0, 2.0)
plain = chsh_vs_window(REFERENCE_WAVEPACKET, NO_MODULATION, dw, imperfections=imp, windows=windows)
shaped = chsh_vs_window(REFERENCE_WAVEPACKET, ModulationSpec.cosinusoidal(), dw, imperfections=imp,
                        windows=windows)
ideal = chsh_vs_window(REFERENCE_WAVEPACKET, ModulationSpec.cosinusoidal(), dw, windows=windows)

for w, a, b, c in list(zip(windows, plain.s_values, shaped.s_values, ideal.s_values))[::5]:
    print(f"W = {w:5.1f} ns   |S| plain {a:.3f}   modulated {b:.3f}   modulated, no noise {c:.3f}")
print(f"unmodulated |S| crosses 2 at W = {plain.crossing():.1f} ns")

# %% [markdown]
# Without noise the modulated curve stays above 2 at every window. It still
# ripples, because a window that cuts partway through an envelope period
# weights the phases unevenly. With the calibrated accidental rate the
# modulated violation lasts to roughly 40 ns instead of 16 ns.
