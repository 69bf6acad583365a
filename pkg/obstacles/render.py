import numpy as np
from PIL import Image, ImageDraw

from .core import ImageRGB, rasterize_roi

ROI_COLOR = (255, 105, 180)
ROI_ALPHA = 0.35
RGB_COLOR = (0, 0, 255)
STEREO_COLOR = (0, 200, 0)
ALARM_COLOR = (255, 0, 0)
ALARM_BORDER = 4


def fill_roi(pixels, roi_mask, color=ROI_COLOR, alpha=ROI_ALPHA):
    blended = pixels.astype(np.float64)
    blended[roi_mask] = (1.0 - alpha) * blended[roi_mask] + alpha * np.asarray(color, dtype=np.float64)
    return np.floor(blended + 0.5).astype(np.uint8)


def _outline(draw, box, color, grow=0):
    draw.rectangle((box.x_min - grow, box.y_min - grow, box.x_max + grow, box.y_max + grow), outline=color)


def render_overlay(bundle, result, roi, alarm_border=True):
    """Annotated copy of the frame.

    The ROI is tinted pink, averaged RGB-channel boxes are outlined in blue,
    averaged stereo boxes in green and every final detection gets a blue box
    inside a green one. Alarmed frames get a red border.
    """
    frame = bundle.rgb
    mask = rasterize_roi(roi, frame.width, frame.height)
    canvas = Image.fromarray(fill_roi(frame.pixels, mask))
    draw = ImageDraw.Draw(canvas)

    for box in result.rgb_averaged:
        _outline(draw, box, RGB_COLOR)
    for box in result.stereo_averaged:
        _outline(draw, box, STEREO_COLOR)
    for detection in result.detections:
        _outline(draw, detection.bbox, RGB_COLOR)
        _outline(draw, detection.bbox, STEREO_COLOR, grow=2)

    if alarm_border and result.alarm:
        draw.rectangle((0, 0, frame.width - 1, frame.height - 1), outline=ALARM_COLOR, width=ALARM_BORDER)
    return ImageRGB(np.asarray(canvas))


def save_image(img, path):
    Image.fromarray(img.pixels.copy()).save(path)
