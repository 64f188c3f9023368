"""
Procedural edge conditions: Canny and a dilated-and-smoothed sketch
"""
import numpy as np
from scipy import ndimage

from easyctrl.conditions.base import ConditionMap, Modality, gray_to_rgb
from easyctrl.exceptions import ValidationError

LUMA = np.array([0.299, 0.587, 0.114])
# Sobel kernels normalized by 1/8 so a unit step has gradient 1/2 per pixel.
SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]) / 8.0
SOBEL_Y = SOBEL_X.T
CONNECTIVITY = np.ones((3, 3), dtype=bool)

# quantized direction -> (dy, dx) of the forward neighbour; the backward one is the negation
DIRECTION_OFFSETS = {
    0: (0, 1),
    45: (1, 1),
    90: (1, 0),
    135: (1, -1),
}


def gaussian_kernel(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    """Sampled, sum-normalized 2-D Gaussian."""
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def to_gray(image: np.ndarray) -> np.ndarray:
    if image.ndim != 3 or image.shape[-1] != 3:
        raise ValidationError(f"expected an H x W x 3 image, got shape {image.shape}")
    return image.astype(np.float64) @ LUMA


def blur(image: np.ndarray) -> np.ndarray:
    return ndimage.correlate(image, gaussian_kernel(), mode="reflect")


def gradients(gray: np.ndarray):
    """Sobel magnitude and the direction quantized to {0, 45, 90, 135} degrees."""
    gx = ndimage.correlate(gray, SOBEL_X, mode="reflect")
    gy = ndimage.correlate(gray, SOBEL_Y, mode="reflect")
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.rad2deg(np.arctan2(gy, gx)), 180.0)
    direction = np.zeros(gray.shape, dtype=np.int64)
    direction[(angle >= 22.5) & (angle < 67.5)] = 45
    direction[(angle >= 67.5) & (angle < 112.5)] = 90
    direction[(angle >= 112.5) & (angle < 157.5)] = 135
    return magnitude, direction


def non_maximum_suppression(magnitude: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """
    Keep pixels with mag >= backward neighbour and mag > forward neighbour.

    Neighbours outside the image count as zero.
    """
    height, width = magnitude.shape
    padded = np.pad(magnitude, 1, mode="constant")
    keep = np.zeros(magnitude.shape, dtype=bool)
    for angle, (dy, dx) in DIRECTION_OFFSETS.items():
        forward = padded[1 + dy:1 + dy + height, 1 + dx:1 + dx + width]
        backward = padded[1 - dy:1 - dy + height, 1 - dx:1 - dx + width]
        selected = direction == angle
        keep |= selected & (magnitude >= backward) & (magnitude > forward)
    return keep


def hysteresis(candidates: np.ndarray, strong: np.ndarray) -> np.ndarray:
    """Keep 8-connected components of `candidates` that contain a strong pixel."""
    labels, count = ndimage.label(candidates, structure=CONNECTIVITY)
    if count == 0:
        return np.zeros(candidates.shape, dtype=bool)
    anchored = np.unique(labels[strong & candidates])
    anchored = anchored[anchored > 0]
    return np.isin(labels, anchored)


def canny_edges(image: np.ndarray, low: float = 0.1, high: float = 0.2) -> np.ndarray:
    """
    Boolean Canny edge map of an H x W x 3 image in [0, 1].

    Args:
        image: RGB image
        low: Weak threshold on the gradient magnitude
        high: Strong threshold on the gradient magnitude

    Returns:
        np.ndarray: H x W bool edge mask
    """
    if not 0.0 <= low <= high:
        raise ValidationError(f"thresholds must satisfy 0 <= low <= high, got low={low}, high={high}")
    magnitude, direction = gradients(blur(to_gray(image)))
    thin = non_maximum_suppression(magnitude, direction)
    return hysteresis(thin & (magnitude >= low), thin & (magnitude >= high))


def cond_canny(image: np.ndarray, low: float = 0.1, high: float = 0.2) -> ConditionMap:
    """Canny edges rendered white on black."""
    return ConditionMap(Modality.CANNY, gray_to_rgb(canny_edges(image, low, high).astype(np.float32)))


def sketch_strokes(image: np.ndarray, low: float = 0.1, high: float = 0.2) -> np.ndarray:
    """Canny edges dilated once with a 3x3 square, blurred, and re-thresholded at 0.5."""
    edges = canny_edges(image, low, high)
    thick = ndimage.binary_dilation(edges, structure=CONNECTIVITY, iterations=1)
    return blur(thick.astype(np.float64)) >= 0.5


def cond_sketch(image: np.ndarray, low: float = 0.1, high: float = 0.2) -> ConditionMap:
    return ConditionMap(Modality.SKETCH, gray_to_rgb(sketch_strokes(image, low, high).astype(np.float32)))
