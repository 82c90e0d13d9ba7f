"""Pure Python / numpy versions of the compiled kernels in ``_core.pyx``."""
import numpy as np


def pava(y, w):
    values, weights, starts = [], [], []
    for i, (yi, wi) in enumerate(zip(y, w)):
        values.append(float(yi))
        weights.append(float(wi))
        starts.append(i)
        while len(values) > 1 and values[-2] >= values[-1]:
            wr, vr = weights.pop(), values.pop()
            starts.pop()
            wsum = weights[-1] + wr
            values[-1] = (values[-1] * weights[-1] + vr * wr) / wsum
            weights[-1] = wsum
    return (np.array(values, dtype=np.float64),
            np.array(weights, dtype=np.float64),
            np.array(starts, dtype=np.intp))


def binned_moments(u, e, bounds):
    u = np.asarray(u, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.intp)
    sizes = np.diff(bounds)
    starts = bounds[:-1]
    rmv = np.sqrt(np.add.reduceat(u * u, starts) / sizes)
    rmse = np.sqrt(np.add.reduceat(e * e, starts) / sizes)
    z = e / u
    mz = np.add.reduceat(z, starts) / sizes
    dev = z - np.repeat(mz, sizes)
    with np.errstate(divide="ignore", invalid="ignore"):
        zvar = np.add.reduceat(dev * dev, starts) / (sizes - 1)
    zvar[sizes < 2] = np.nan
    return rmv, rmse, zvar
