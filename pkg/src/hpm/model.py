"""The full dubbing network: encoders, aligner, prosody adaptor, booster, generator."""

import torch
import torch.nn as nn

from .aligner import (ConvTransposeExpander, DuplicateExpander, LipPhonemeAligner, frame_ratio,
                      resample_nearest, upsample_to_mel)
from .booster import AtmosphereBooster
from .config import Config
from .frontend import AffectEncoder, LipEncoder, PhonemeEncoder, SceneProjector, SpeakerEncoder
from .generator import MelGenerator
from .layers import sequence_mask, zero_masked
from .prosody import ProsodyAdaptor


class DubbingModel(nn.Module):
    def __init__(self, config=None, lip_channels_in=1):
        super().__init__()
        cfg = config or Config()
        self.config = cfg
        self.ratio = frame_ratio(cfg["audio.sr"], cfg["audio.hop"], cfg["audio.fps"])
        d = cfg["model.d_model"]
        heads = cfg["model.fft_heads"]
        ffn, kern, drop = cfg["model.ffn_hidden"], cfg["model.ffn_kernel"], cfg["model.dropout"]

        self.phoneme_encoder = PhonemeEncoder(d, cfg["model.phoneme_blocks"], heads, ffn, kern, drop)
        self.use_aligner = cfg["aligner.enabled"]
        if self.use_aligner:
            self.lip_encoder = LipEncoder(
                d, cfg["model.lip_blocks"], heads, ffn, kern, drop, in_channels=lip_channels_in,
                channels=(cfg["model.lip_channels1"], cfg["model.lip_channels2"]))
            self.aligner = LipPhonemeAligner(d, cfg["aligner.heads"])
        if cfg["aligner.expansion"] == "duplicate":
            self.expander = DuplicateExpander(self.ratio)
        else:
            self.expander = ConvTransposeExpander(d, self.ratio, cfg["aligner.stride"], cfg["aligner.kernel"])
        self.affect_encoder = AffectEncoder(d, cfg["adaptor.affect_source"], lip_channels_in,
                                            cfg["model.face_channels"])
        self.speaker_encoder = SpeakerEncoder(cfg["model.n_speakers"], d)
        self.scene_projector = SceneProjector(cfg["model.scene_dim"], d)
        self.adaptor = ProsodyAdaptor(
            d, cfg["adaptor.attn_dim"], cfg["model.predictor_kernel"], drop,
            enabled=cfg["adaptor.enabled"], use_valence=cfg["adaptor.use_valence"],
            use_arousal=cfg["adaptor.use_arousal"])
        self.booster = AtmosphereBooster(d, cfg["model.n_emotions"], cfg["booster.enabled"],
                                         cfg["booster.strict_paper_attention"])
        self.generator = MelGenerator(
            d, cfg["model.decoder_blocks"], heads, ffn, kern, drop, cfg["model.n_mels"],
            cfg["model.postnet_channels"], cfg["model.postnet_kernel"], cfg["model.postnet_layers"])

    @property
    def has_emotion_head(self):
        return self.booster.enabled

    def forward(self, batch, target_lengths=None):
        """Run the network on a collated batch.

        ``target_lengths`` (teacher mel lengths) fixes T_y during training;
        without it every clip gets ``round(r * T_v)`` frames.
        """
        token_mask, video_mask = batch["token_mask"], batch["video_mask"]
        token_len, video_len = token_mask.sum(1), video_mask.sum(1)

        phonemes = self.phoneme_encoder(batch["tokens"], token_mask)
        align_weights = None
        if self.use_aligner:
            lips = self.lip_encoder(batch["lips"], video_mask)
            fused, align_weights = self.aligner(lips, phonemes, video_mask, token_mask)
        else:
            fused = zero_masked(resample_nearest(phonemes, token_len, video_len), video_mask)

        phoneme_lip, mel_len = self.expander(fused, video_len, target_lengths)
        mel_mask = sequence_mask(mel_len, phoneme_lip.shape[1])

        valence, arousal = self.affect_encoder(
            video_mask, batch.get("valence"), batch.get("arousal"), batch.get("faces", batch.get("lips")))
        valence = upsample_to_mel(valence, video_len, mel_len, self.ratio)
        arousal = upsample_to_mel(arousal, video_len, mel_len, self.ratio)
        speaker = self.speaker_encoder(batch["speaker"], batch.get("speaker_vector"))

        prosody = self.adaptor(phoneme_lip, mel_mask, arousal, valence, speaker)
        scene = self.scene_projector(batch["scene"], batch.get("scene_mask"))
        boost = self.booster(prosody["prosody"], scene, batch.get("scene_mask"), mel_mask)
        mel_before, mel_after = self.generator(
            phoneme_lip, prosody["prosody"], boost["emotion_hidden"], mel_mask)
        return {
            "mel_before": mel_before,
            "mel_after": mel_after,
            "mel_mask": mel_mask,
            "mel_len": mel_len,
            "pitch": prosody["pitch"],
            "energy": prosody["energy"],
            "emotion_logits": boost["emotion_logits"],
            "align_weights": align_weights,
            "arousal_weights": prosody["arousal_weights"],
            "valence_weights": prosody["valence_weights"],
            "scene_weights": boost["scene_weights"],
            "phoneme_lip": phoneme_lip,
            "prosody": prosody["prosody"],
            "emotion_hidden": boost["emotion_hidden"],
        }

    def parameter_groups(self):
        """Top-level submodule name -> list of (name, parameter)."""
        groups = {}
        for name, p in self.named_parameters():
            groups.setdefault(name.split(".")[0], []).append((name, p))
        return groups


def build_model(config, dtype=None):
    model = DubbingModel(config)
    dtype = dtype or (torch.float64 if config["train.dtype"] == "float64" else torch.float32)
    return model.to(dtype)
