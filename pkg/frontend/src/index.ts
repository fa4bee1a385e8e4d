export { ApiError, StudioClient, regionLayerBytes } from "./client.js";
export type { CreateSessionFiles, StudioApi } from "./client.js";
export { brushWeight, stampBrush, strokeBrush } from "./brush.js";
export type { BrushMode, BrushSettings } from "./brush.js";
export { MaskEditor } from "./editor.js";
export type { AppliedResult, ReferenceEntry, SavedMask } from "./editor.js";
export {
  combineMasks,
  eraseSelection,
  MaskLayer,
  REGION_NAMES,
  roundHalfToEven,
  scaleMask,
  selectionPixels,
} from "./mask.js";
export type { CombineEntry, RegionName, RegionSelection } from "./mask.js";
export { decodeGrayPng, decodePng, decodeRgbPng, encodeGrayPng } from "./png.js";
export type { DecodedPng, GrayImage, RgbImage } from "./png.js";
export type {
  ApplyResponse,
  ExtractResponse,
  HealthInfo,
  MaskVersion,
  RegionLayersResponse,
  ResultVersion,
  SaveMaskResponse,
  SessionState,
  SourceImage,
} from "./types.js";
