"""Build taylor_hourly.csv from the half-hourly England and Wales demand series
(Taylor 2003) as shipped in pmdarima's datasets/_taylor.py.

    python3 convert_taylor.py path/to/_taylor.py

Pairs of half-hours are averaged to hourly MW. The slice is the first 61 days
(Mon 5 Jun 2000 to Fri 4 Aug 2000, 1464 hours).
"""
import datetime
import re
import sys

DAYS = 61

src = open(sys.argv[1]).read()
body = src[src.index("rslt = np.array([") : src.index("]).astype")]
values = [float(v) for v in re.findall(r"\d+(?:\.\d+)?", body)]
assert len(values) == 4032, len(values)

start = datetime.datetime(2000, 6, 5)
with open("taylor_hourly.csv", "w") as f:
    f.write("timestamp,demand_mw,hour_of_day,day_of_week,day_type\n")
    for h in range(DAYS * 24):
        t = start + datetime.timedelta(hours=h)
        mw = (values[2 * h] + values[2 * h + 1]) / 2
        f.write("%s,%g,%d,%d,%d\n" % (t.strftime("%Y-%m-%d %H:%M"), mw, t.hour, t.weekday(),
                                      1 if t.weekday() >= 5 else 0))

with open("taylor_hourly.schema", "w") as f:
    f.write("timestamp = timestamp\n"
            "demand_mw = load\n"
            "hour_of_day = categorical:24\n"
            "day_of_week = categorical:7\n"
            "day_type = categorical:2\n")
