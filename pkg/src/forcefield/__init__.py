"""Environmental force-field mapping for autonomous surface vehicles.

Raw pose, wind, four-wheel current and depth logs are aligned in time,
corrected for the vehicle's own motion, and regressed with Gaussian
Processes into gridded wind, current and depth maps.
"""

__version__ = "0.1.0"
