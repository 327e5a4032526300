"""How long does each kind of channel slot last?

Walks the timing layer: header time, then the success / collision / timeout
durations for both access methods and both rate profiles.
"""

from backofflab import (AccessMode, compute_header_time, one_mbps_params,
                        slot_durations, table1_params)

for label, phy in (("11 Mb/s data rate", table1_params()),
                   ("1 Mb/s data rate", one_mbps_params())):
    print(f"\n=== {label} ===")
    print(f"header time: {compute_header_time(phy):8.2f} us "
          f"(preamble at {phy.control_rate_bps/1e6:.0f} Mb/s, "
          f"MAC+UDP/IP at {phy.data_rate_bps/1e6:.0f} Mb/s)")
    print(f"payload time ({phy.payload_bits} bits): {phy.payload_time_us:8.2f} us")
    for mode in AccessMode:
        d = slot_durations(phy, mode)
        print(f"  {mode.value:>7}:  T_s = {d.t_s_us:8.2f} us   "
              f"T_c = {d.t_c_us:8.2f} us   T_o = {d.t_o_us:6.2f} us   "
              f"idle = {d.t_idle_us:.0f} us")

print("""
Note how the basic method pays the whole header+payload+ACK exchange on a
collision, while RTS/CTS collisions only burn the short RTS/CTS exchange;
success always costs two extra propagation delays over the collision time.
""")
