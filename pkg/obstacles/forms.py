from django import forms
from django.core.exceptions import ValidationError


def validate_positive(value):
    if value is not None and value <= 0:
        raise ValidationError("Ensure this value is greater than 0.")


def validate_odd(value):
    if value is not None and value % 2 == 0:
        raise ValidationError("Kernel sizes must be odd.")


def positive_float(**kwargs):
    return forms.FloatField(validators=[validate_positive], **kwargs)


def odd_kernel():
    return forms.IntegerField(min_value=1, validators=[validate_odd])


class ConfigSectionForm(forms.Form):
    """Base for one section of the pipeline configuration file"""

    def unknown_keys(self):
        return sorted(set(self.data) - set(self.fields))


class CameraForm(ConfigSectionForm):
    """Camera intrinsics, either explicit or derived from a named preset"""
    preset = forms.ChoiceField(
        required=False,
        choices=[('', 'explicit'), ('d455', 'RealSense D455'), ('zed2', 'ZED 2')],
    )
    width = forms.IntegerField(min_value=1)
    height = forms.IntegerField(min_value=1)
    fx = positive_float(required=False)
    fy = positive_float(required=False)
    cx = forms.FloatField(required=False, min_value=0)
    cy = forms.FloatField(required=False, min_value=0)
    baseline = positive_float(required=False)

    intrinsic_fields = ('fx', 'fy', 'cx', 'cy', 'baseline')

    def clean(self):
        cleaned_data = super().clean()
        width, height = cleaned_data.get('width'), cleaned_data.get('height')
        if width is None or height is None:
            return cleaned_data

        preset = cleaned_data.get('preset')
        if preset:
            from .config import camera_preset

            derived = camera_preset(preset, width, height)
            for name in self.intrinsic_fields:
                if cleaned_data.get(name) is None:
                    cleaned_data[name] = getattr(derived, name)

        missing = [name for name in self.intrinsic_fields if cleaned_data.get(name) is None]
        for name in missing:
            if name not in self.errors:
                self.add_error(name, "This field is required unless a preset is given.")
        if missing:
            return cleaned_data

        if cleaned_data['cx'] >= width:
            self.add_error('cx', "Principal point must lie inside the image.")
        if cleaned_data['cy'] >= height:
            self.add_error('cy', "Principal point must lie inside the image.")
        return cleaned_data


class MountForm(ConfigSectionForm):
    height_m = positive_float()
    pitch_deg = forms.FloatField(min_value=-89.0, max_value=89.0)


class RoiForm(ConfigSectionForm):
    """Polygon vertices as a list of [x, y] pixel pairs"""
    vertices = forms.JSONField()

    def clean_vertices(self):
        vertices = self.cleaned_data.get('vertices')
        if not isinstance(vertices, list):
            raise ValidationError("Vertices must be a list of [x, y] pairs.")
        pairs = []
        for vertex in vertices:
            if (not isinstance(vertex, (list, tuple)) or len(vertex) != 2
                    or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in vertex)):
                raise ValidationError(f"Bad vertex {vertex!r}: expected [x, y].")
            pairs.append((float(vertex[0]), float(vertex[1])))
        if len(pairs) < 3:
            raise ValidationError("A region of interest needs at least 3 vertices.")
        return pairs


class PreprocForm(ConfigSectionForm):
    saturation_gain = positive_float()
    median_kernel = odd_kernel()
    erosion_kernel = odd_kernel()
    apply_erosion = forms.BooleanField(required=False)
    dilation_kernel = odd_kernel()
    apply_dilation = forms.BooleanField(required=False)


class GraphSegForm(ConfigSectionForm):
    sigma = forms.FloatField(min_value=0)
    k = positive_float()
    min_size = forms.IntegerField(min_value=1)


class ExtractForm(ConfigSectionForm):
    min_area = forms.IntegerField(min_value=1)
    max_area_fraction = positive_float(max_value=1.0)
    ground_tolerance = forms.FloatField(min_value=0)


class SlicForm(ConfigSectionForm):
    region_size = forms.IntegerField(min_value=2)
    compactness = positive_float()
    iterations = forms.IntegerField(min_value=1)


class StereoForm(ConfigSectionForm):
    min_height = forms.FloatField(min_value=0)
    max_height = positive_float()
    max_range = positive_float()

    def clean(self):
        cleaned_data = super().clean()
        low, high = cleaned_data.get('min_height'), cleaned_data.get('max_height')
        if low is not None and high is not None and low >= high:
            raise ValidationError("min_height must be below max_height.")
        return cleaned_data


class RansacForm(ConfigSectionForm):
    iterations = forms.IntegerField(min_value=1)
    threshold = positive_float()
    seed = forms.IntegerField(min_value=0)
    max_tilt_deg = positive_float(max_value=90.0)


class DbscanForm(ConfigSectionForm):
    eps = positive_float()
    min_pts = forms.IntegerField(min_value=1)
    min_cluster_size = forms.IntegerField(min_value=1)


class FusionForm(ConfigSectionForm):
    dist_threshold = forms.FloatField(min_value=0)
    match_radius = positive_float()
    window = forms.IntegerField(min_value=1)
    min_presence = forms.IntegerField(min_value=1)
    priority = forms.ChoiceField(choices=[('stereo,rgb', 'stereo first'), ('rgb,stereo', 'rgb first')])

    def clean(self):
        cleaned_data = super().clean()
        window, presence = cleaned_data.get('window'), cleaned_data.get('min_presence')
        if window is not None and presence is not None and presence > window:
            self.add_error('min_presence', "min_presence cannot exceed the window length.")
        return cleaned_data


class RuntimeForm(ConfigSectionForm):
    threads = forms.IntegerField(min_value=1)
    dense_cloud = forms.BooleanField(required=False)


SECTION_FORMS = {
    'camera': CameraForm,
    'mount': MountForm,
    'roi': RoiForm,
    'preproc': PreprocForm,
    'graphseg': GraphSegForm,
    'extract': ExtractForm,
    'slic': SlicForm,
    'stereo': StereoForm,
    'ransac': RansacForm,
    'dbscan': DbscanForm,
    'fusion': FusionForm,
    'runtime': RuntimeForm,
}
