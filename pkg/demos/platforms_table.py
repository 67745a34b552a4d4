"""Required squeezing for the bundled list of mechanical resonators.

Run with ``python demos/platforms_table.py``. The squeezing at which the
enhanced Kerr rate g s^4 equals the enhanced decoherence rate Gamma_d s^2 is
s^2 = Gamma_d / g; devices are listed from most to least promising.
"""

from squeezekerr.platforms import ingest_table, required_squeezing_db, sort_by_squeezing

reports = sort_by_squeezing([required_squeezing_db(r) for r in ingest_table()])
for rep in reports:
    print(f"{rep.name:22s} g = {rep.g_value:9.3g} rad/s   s^2 = {rep.squeezing_ratio:9.3g}   "
          f"{rep.rounded_db:5.0f} dB")
