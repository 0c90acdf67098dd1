"""Published verification rows for an 8-qubit QCNN on MNIST 0/1.

Each row is (p0, p1, v2, cos_theta_min, delta, class) as printed with six
significant digits.  Row 2 prints p1 = 0.86608, so p0 + p1 is 0.999998 there;
anything keyed on these rows uses p0 only.
"""

N_QUBITS = 8

TABLE_EPS_0 = (
    (0.625719, 0.374281, 0.0157457, 0.999876, 0.000123487, 0),
    (0.133918, 0.86608, -0.0458499, 0.998948, 0.00104755, 1),
    (0.115384, 0.884616, -0.0481711, 0.998839, 0.00115637, 1),
    (0.11719, 0.88281, -0.0479449, 0.99885, 0.00114553, 1),
    (0.688041, 0.311959, 0.0235512, 0.999723, 0.000276284, 0),
)

TABLE_EPS_001 = (
    (0.625719, 0.374281, 0.0157457, 0.999886, 0.00011386, 0),
    (0.133918, 0.86608, -0.0458499, 0.998977, 0.00101915, 1),
    (0.115384, 0.884616, -0.0481711, 0.998869, 0.00112652, 1),
    (0.11719, 0.88281, -0.0479449, 0.99888, 0.00111582, 1),
    (0.688041, 0.311959, 0.0235512, 0.999737, 0.000261789, 0),
)

TABLES = {0.0: TABLE_EPS_0, 0.01: TABLE_EPS_001}
