/**
 * Microphone capture for the speech pipeline.
 *
 * Records through the browser's MediaRecorder and emits one base64-encoded
 * audio chunk every five seconds, matching the transcription cadence the
 * server expects. Capture is independent of the recording mutation: the
 * caller starts the server-side recording first, then feeds chunks here.
 */

export const CHUNK_MS = 5000;

export class AudioCapture {
  private readonly send: (audioB64: string) => void;
  private recorder: MediaRecorder | null = null;
  private stream: MediaStream | null = null;

  constructor(send: (audioB64: string) => void) {
    this.send = send;
  }

  static supported(): boolean {
    return (
      typeof navigator !== "undefined" &&
      !!navigator.mediaDevices?.getUserMedia &&
      typeof MediaRecorder !== "undefined"
    );
  }

  get active(): boolean {
    return this.recorder !== null;
  }

  async start(): Promise<void> {
    if (this.recorder !== null) return;
    const stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    this.stream = stream;
    const recorder = new MediaRecorder(stream);
    recorder.ondataavailable = (ev: BlobEvent) => {
      if (ev.data.size > 0) {
        void this.encode(ev.data).then(this.send);
      }
    };
    recorder.start(CHUNK_MS);
    this.recorder = recorder;
  }

  stop(): void {
    if (this.recorder !== null && this.recorder.state !== "inactive") {
      this.recorder.stop(); // flushes a final dataavailable event
    }
    this.recorder = null;
    this.stream?.getTracks().forEach((track) => track.stop());
    this.stream = null;
  }

  private async encode(blob: Blob): Promise<string> {
    const bytes = new Uint8Array(await blob.arrayBuffer());
    let binary = "";
    const step = 0x8000; // keep fromCharCode argument counts bounded
    for (let i = 0; i < bytes.length; i += step) {
      binary += String.fromCharCode(...bytes.subarray(i, i + step));
    }
    return btoa(binary);
  }
}
