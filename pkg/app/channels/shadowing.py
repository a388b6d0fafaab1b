import numpy as np

from app.numerics import RandomStream


def correlation(delta_d: float, decorrelation_distance: float) -> float:
    if decorrelation_distance <= 0:
        return 0.0
    return float(np.exp(-abs(delta_d) / decorrelation_distance))


def ar1_update(previous: float, delta_d: float, std_db: float, decorrelation_distance: float, z: float) -> float:
    rho = correlation(delta_d, decorrelation_distance)
    return rho * previous + np.sqrt(1.0 - rho * rho) * std_db * z


def shadowing_track(std_db: float, decorrelation_distance: float, positions, stream: RandomStream) -> np.ndarray:
    """
    Log-normal shadowing (dB) along a sequence of 2-D positions.
    Consecutive values are AR(1) with correlation exp(-|d_i - d_{i-1}| / decorrelation_distance).
    """
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    out = np.zeros(n, dtype=np.float64)
    if n == 0 or std_db == 0:
        return out
    z = stream.generator().standard_normal(n)
    out[0] = std_db * z[0]
    steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    for i in range(1, n):
        out[i] = ar1_update(out[i - 1], steps[i - 1], std_db, decorrelation_distance, z[i])
    return out
