"""
Published parameter counts and memory sizes of the comparison models.

These are reported figures, carried verbatim; nothing here is recomputed.
``memory_mb`` is None where no figure was published.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class ReportedModel:
    table: str
    source: str
    model: str
    params: int
    memory_mb: Optional[float]


REPORTED_MODELS = (
    # 3-class COVID-19 / Normal / Viral Pneumonia
    ReportedModel("3-class", "Gupta et al. (2021)", "ResNet 101", 44_654_504, 171),
    ReportedModel("3-class", "Gupta et al. (2021)", "InceptionV3", 24_000_000, 92),
    ReportedModel("3-class", "Gupta et al. (2021)", "Xception", 22_910_480, 88),
    ReportedModel("3-class", "Gupta et al. (2021)", "InstaCOV-Net-19", 54_914_918, None),
    ReportedModel("3-class", "Heidari et al. (2020)", "VGG16", 138_000_000, 528),
    ReportedModel("3-class", "Wang et al. (2020)", "COVID-NET", 11_750_000, None),
    ReportedModel("3-class", "Zebin and Rezvy (2021)", "VGG16", 138_000_000, 528),
    ReportedModel("3-class", "Zebin and Rezvy (2021)", "ResNet 50", 26_000_000, 99),
    ReportedModel("3-class", "Zebin and Rezvy (2021)", "EfficientNetB0", 5_300_000, 29),
    ReportedModel("3-class", "Apostolopoulos et al. (2020)", "VGG19", 143_667_240, 549),
    ReportedModel("3-class", "this study", "MobileNetV2", 3_538_984, 14),
    # 2-class COVID-19 / Viral Pneumonia
    ReportedModel("2-class COVID-19/Viral Pneumonia", "Narin et al. (2020)", "InceptionV3", 24_000_000, 92),
    ReportedModel("2-class COVID-19/Viral Pneumonia", "Narin et al. (2020)", "ResNet 50", 26_000_000, 98),
    ReportedModel("2-class COVID-19/Viral Pneumonia", "Narin et al. (2020)", "ResNet 101", 44_654_504, 171),
    ReportedModel("2-class COVID-19/Viral Pneumonia", "Narin et al. (2020)", "ResNet 152", 60_344_232, 232),
    ReportedModel("2-class COVID-19/Viral Pneumonia", "Narin et al. (2020)", "Inception ResNetV2", 55_800_000, 215),
    ReportedModel("2-class COVID-19/Viral Pneumonia", "this study", "MobileNetV2", 3_538_984, 14),
    # 2-class COVID-19 / Normal
    ReportedModel("2-class COVID-19/Normal", "Nayak et al. (2021)", "ResNet 34", 21_500_000, None),
    ReportedModel("2-class COVID-19/Normal", "Nayak et al. (2021)", "GoogLeNet", 7_000_000, 40),
    ReportedModel("2-class COVID-19/Normal", "Nayak et al. (2021)", "AlexNet", 60_000_000, 217),
    ReportedModel("2-class COVID-19/Normal", "Nayak et al. (2021)", "VGG16", 138_000_000, 528),
    ReportedModel("2-class COVID-19/Normal", "Gupta et al. (2021)", "InceptionV3", 24_000_000, 92),
    ReportedModel("2-class COVID-19/Normal", "Gupta et al. (2021)", "ResNet 101", 44_654_504, 171),
    ReportedModel("2-class COVID-19/Normal", "Gupta et al. (2021)", "Xception", 22_910_480, 88),
    ReportedModel("2-class COVID-19/Normal", "this study", "MobileNetV2", 3_538_984, 14),
)
