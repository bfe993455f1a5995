"""Native harness for the logged two-pose motion, used as the reference for
the frontend's bit-equality check: identical lockstep inputs must produce an
identical telemetry CSV through any client path.

Run:  python demos/logged_motion_native.py --host H --tcp-port T --desk-port D \
          --udp-port U --csv out.csv
"""

import argparse

from pandasim import JOINT_POSITION_START, fk
from pandasim.client import Desk, Panda


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--tcp-port", type=int, default=7100)
    parser.add_argument("--desk-port", type=int, default=7101)
    parser.add_argument("--udp-port", type=int, default=7200)
    parser.add_argument("--csv", required=True)
    parser.add_argument("--skip-desk", action="store_true",
                        help="assume the interface is already active")
    args = parser.parse_args(argv)

    desk = None
    if not args.skip_desk:
        desk = Desk(args.host, "admin", "admin", port=args.desk_port)
        desk.unlock()
        desk.activate_fci()
    panda = Panda(args.host, tcp_port=args.tcp_port, udp_port=args.udp_port)

    T_0 = fk(JOINT_POSITION_START)
    T_0[1, 3] = 0.25
    T_1 = T_0.copy()
    T_1[1, 3] = -0.25

    panda.move_to_pose(T_0)
    panda.enable_logging(2000)
    panda.move_to_pose(T_1)
    panda.disable_logging()
    panda.export_log_csv(args.csv)
    log = panda.get_log()
    print(f"logged {len(log['time'])} states to {args.csv}")

    panda.close()
    if desk is not None:
        desk.close()


if __name__ == "__main__":
    main()
