"""3D U-Net over VOI patches.

Input: 3 channels (scaled orientation labels, temperature now, temperature
one ML step ahead). Output: one logit channel per orientation class; training
applies log-softmax + negative log likelihood per voxel. Convolutions are
3x3x3, stride 1, padding 1, batch-normalized; pooling halves each dimension,
the decoder upsamples with transposed convolutions and concatenates encoder
features. Spatial dims must be divisible by 2**depth.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class DoubleConv(nn.Module):
    def __init__(self, c_in, c_out):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv3d(c_in, c_out, kernel_size=3, stride=1, padding=1),
            nn.BatchNorm3d(c_out),
            nn.ReLU(inplace=True),
            nn.Conv3d(c_out, c_out, kernel_size=3, stride=1, padding=1),
            nn.BatchNorm3d(c_out),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.block(x)


class UNet3D(nn.Module):
    def __init__(self, in_channels: int = 3, n_classes: int = 20,
                 base_channels: int = 8, depth: int = 2):
        super().__init__()
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.depth = depth
        self.n_classes = n_classes
        chans = [base_channels * (2 ** d) for d in range(depth + 1)]
        self.encoders = nn.ModuleList()
        c_prev = in_channels
        for c in chans[:-1]:
            self.encoders.append(DoubleConv(c_prev, c))
            c_prev = c
        self.pool = nn.MaxPool3d(kernel_size=2, stride=2)
        self.bottleneck = DoubleConv(chans[-2], chans[-1])
        self.upconvs = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for c_hi, c_lo in zip(chans[:0:-1], chans[-2::-1]):
            self.upconvs.append(nn.ConvTranspose3d(c_hi, c_lo, kernel_size=2, stride=2))
            self.decoders.append(DoubleConv(c_lo * 2, c_lo))
        self.head = nn.Conv3d(chans[0], n_classes, kernel_size=1)

    def forward(self, x):
        pool_factor = 2 ** self.depth
        for size in x.shape[2:]:
            if size % pool_factor:
                raise ValueError(
                    f"spatial dims {tuple(x.shape[2:])} not divisible by {pool_factor}"
                )
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.upconvs, self.decoders, reversed(skips)):
            x = up(x)
            x = dec(torch.cat([skip, x], dim=1))
        return self.head(x)

    def log_probabilities(self, x):
        return F.log_softmax(self.forward(x), dim=1)

    def predict_labels(self, x):
        with torch.no_grad():
            return self.forward(x).argmax(dim=1)
