const images = [
  { url: 'images/mountain.jpg', alt: 'Mountain', id: 'img1', description: 'A mountain at dawn' },
  { url: 'images/lake.jpg', alt: 'Lake', id: 'img2', description: 'A quiet lake' },
  { url: 'images/forest.jpg', alt: 'Forest', id: 'img3', description: 'A pine forest' },
  { url: 'images/desert.jpg', alt: 'Desert', id: 'img4', description: 'Dunes at noon' }
];
