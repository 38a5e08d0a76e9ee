import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(angle):
    """
    reduce an angle (or array of angles) to [0, 2π)
    """
    wrapped = np.mod(angle, TWO_PI)
    # np.mod can return exactly 2π for tiny negative inputs
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def angle_difference(a, b):
    """
    signed difference a - b reduced to [-π, π)
    """
    return np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi


def angle_distance(a, b) -> float:
    return float(np.abs(angle_difference(a, b)))


def check_matrix(matrix: any, shape: tuple[int, int], name: str = "matrix") -> np.ndarray:
    """
    convert to a float array and check its shape

    :param matrix: anything numpy can turn into an array
    :param shape: expected shape
    :param name: used in error messages
    :return: float numpy array
    """
    try:
        arr = np.asarray(matrix, dtype=float)
    except (TypeError, ValueError):
        raise ValueError(f"{name} is not a real matrix")

    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")

    return arr


def detect_anomaly(values: dict[str, any]) -> None:
    """
    check named arrays for NaN, infinite and absurdly large entries

    :param values: mapping name -> array-like
    """
    threshold = 1e307
    anomaly_details = []

    nan_names = [name for name, v in values.items() if np.isnan(np.asarray(v, dtype=complex)).any()]
    if nan_names:
        anomaly_details.append(f"NaN values found in: {nan_names}")

    inf_names = [name for name, v in values.items() if np.isinf(np.asarray(v, dtype=complex)).any()]
    if inf_names:
        anomaly_details.append(f"infinite values found in: {inf_names}")

    large_names = [
        name for name, v in values.items()
        if name not in inf_names and (np.abs(np.asarray(v, dtype=complex)) > threshold).any()
    ]
    if large_names:
        anomaly_details.append(f"values exceeding threshold found in: {large_names}")

    if anomaly_details:
        error_message = "anomalies detected:\n" + "\n".join(anomaly_details)
        raise ValueError(error_message)
