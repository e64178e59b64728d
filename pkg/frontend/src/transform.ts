// World <-> screen transform with pan and zoom.  World y points up,
// screen y points down.

export class Viewport {
  scale = 24; // px per meter
  offsetX = 0;
  offsetY = 0;

  fit(worldW: number, worldH: number, pxW: number, pxH: number,
      margin = 20): void {
    this.scale = Math.min((pxW - 2 * margin) / worldW,
                          (pxH - 2 * margin) / worldH);
    this.offsetX = (pxW - worldW * this.scale) / 2;
    this.offsetY = (pxH - worldH * this.scale) / 2;
  }

  toScreen(wx: number, wy: number, worldH: number): [number, number] {
    return [this.offsetX + wx * this.scale,
            this.offsetY + (worldH - wy) * this.scale];
  }

  toWorld(px: number, py: number, worldH: number): [number, number] {
    return [(px - this.offsetX) / this.scale,
            worldH - (py - this.offsetY) / this.scale];
  }

  zoomAt(px: number, py: number, factor: number): void {
    const clamped = Math.min(8, Math.max(0.25, factor));
    this.offsetX = px - (px - this.offsetX) * clamped;
    this.offsetY = py - (py - this.offsetY) * clamped;
    this.scale *= clamped;
  }

  pan(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }
}
