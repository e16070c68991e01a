# %% [markdown]
# # Event-level simulation
#
# The analytic results above assume infinite statistics. Here we generate
# time-tagged detection events for each analyzer setting, pair them with a
# coincidence window, and run the same CHSH and tomography analyses as an
# experiment would.

# %%
from biphoton import NO_MODULATION, ModulationSpec, angular_frequency, concurrence
from biphoton import montecarlo as mc
from biphoton.calibration import REFERENCE_WAVEPACKET
from biphoton.tomography import mle_reconstruct

window = 100.0
wp = REFERENCE_WAVEPACKET.with_detuning(angular_frequency(50))
for label, mod in (("no modulation", NO_MODULATION), ("cosine", ModulationSpec.cosinusoidal())):
    cfg = mc.RunConfig(pair_rate=1e-5, duration=2.5e10, wavepacket=wp, modulation=mod, seed=11)
    est = mc.simulate_chsh(cfg, window)
    print(f"{label:14s} S = {est.value:+.3f} +- {est.stderr:.3f}   analytic {mc.analytic_chsh(cfg, window):+.3f}")

    tomo = mc.RunConfig(pair_rate=1e-5, duration=6e9, wavepacket=wp, modulation=mod, seed=12, substream=1)
    rho = mle_reconstruct(mc.simulate_tomography(tomo, window))
    print(f"{'':14s} C = {concurrence(rho):.3f}   analytic {concurrence(mc.analytic_state(tomo, window)):.3f}")

# %% [markdown]
# Streams can be saved as CSV for inspection or in a compact binary format.

# %%
stream = mc.simulate_stream(mc.RunConfig(pair_rate=1e-5, duration=1e7, wavepacket=wp, seed=1))
print(stream.to_csv().splitlines()[:4])
print(len(stream.to_bytes()), "bytes for", len(stream), "events")
