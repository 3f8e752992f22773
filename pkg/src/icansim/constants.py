"""Physical constants shared across the simulator."""

SPEED_OF_LIGHT = 299_792_458.0  # m/s
EARTH_RADIUS = 6_371e3  # m, spherical Earth
EARTH_MU = 3.986004418e14  # m^3/s^2
EARTH_ROTATION_RATE = 7.2921159e-5  # rad/s
BOLTZMANN = 1.380649e-23  # J/K
REFERENCE_TEMPERATURE = 290.0  # K
